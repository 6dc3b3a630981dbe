"""Exception types raised across the package."""


class PathmedError(Exception):
    pass


class DimensionMismatch(PathmedError, ValueError):
    pass


class ConstantColumn(PathmedError, ValueError):
    def __init__(self, block, index):
        self.block = block
        self.index = index
        super().__init__(f"column {index} of block {block!r} has zero variance")


class SingularMatrix(PathmedError, ArithmeticError):
    pass


class NotStandardized(PathmedError, ValueError):
    pass


class MaxIterations(PathmedError, RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class InfeasibleSparsity(PathmedError, ValueError):
    pass


class ParseError(PathmedError, ValueError):
    def __init__(self, file, row, col, msg="could not parse"):
        self.file = str(file)
        self.row = row
        self.col = col
        super().__init__(f"{file}: row {row}, column {col}: {msg}")


class NonNumericCell(ParseError):
    def __init__(self, file, row, col, value):
        self.value = value
        super().__init__(file, row, col, f"non-numeric cell {value!r}")


class RowCountMismatch(PathmedError, ValueError):
    pass


class IoError(PathmedError, OSError):
    pass
