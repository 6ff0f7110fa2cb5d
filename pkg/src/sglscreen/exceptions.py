"""Exception types raised by sglscreen."""


class DimensionError(ValueError):
    """Array shapes that do not agree with each other or with a partition."""


class PartitionError(ValueError):
    """Group index sets that are not a disjoint cover of the features."""


class ParseError(ValueError):
    """A problem file could not be parsed.

    ``path`` and ``line`` (1-based, may be None) locate the offending input.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class RaggedRowsError(ParseError):
    pass


class GroupPartitionParseError(ParseError):
    pass


class IndexOutOfRangeError(ParseError):
    pass
