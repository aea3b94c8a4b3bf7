"""Exception hierarchy shared by every lsbn module."""


class LsbnError(Exception):
    """Base class for all errors raised by lsbn."""


class CyclicGraph(LsbnError):
    pass


class InvalidStructure(LsbnError):
    """A local structure, DAG or network violates its invariants."""


class EmptyDataset(LsbnError):
    pass


class SchemaMismatch(LsbnError):
    pass


class UnknownValue(LsbnError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"unknown value {value!r} in row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class MalformedRow(LsbnError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class KOutOfRange(LsbnError):
    pass


class NetworkFormatError(LsbnError):
    """Raised while parsing a network document.

    ``node`` names the offending node when the error is local to one CPT and
    ``line`` carries the line number for syntax errors.
    """

    def __init__(self, message: str, node: str | None = None, line: int | None = None):
        where = []
        if node is not None:
            where.append(f"node {node!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.node = node
        self.line = line


class StateSpaceTooLarge(LsbnError):
    pass


class InfiniteSample(LsbnError):
    """A Monte-Carlo sample had zero probability under the approximating network."""
