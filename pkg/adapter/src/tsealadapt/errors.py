class AdapterError(Exception):
    """Base for everything this package raises on purpose."""


class UnmappedTensor(AdapterError):
    """The checkpoint holds a tensor the manifest does not map."""


class MissingOutputLayer(AdapterError):
    """The manifest does not designate exactly one output layer."""


class ContainerFormatError(AdapterError):
    """A container file violates the documented byte layout."""
