from typing import Optional


class UserError(RuntimeError):
    pass


class NumericalError(RuntimeError):
    pass


class IntegrationError(NumericalError):
    def __init__(
        self, msg: str, path: str, n_rank: Optional[float] = None, solver_message: str = ""
    ):
        super().__init__(msg)
        self.path = path
        self.n_rank = n_rank
        self.solver_message = solver_message

    def __str__(self) -> str:
        details = [self.args[0], f"path={self.path}"]
        if self.n_rank is not None:
            details.append(f"N={self.n_rank}")
        if self.solver_message:
            details.append(f"solver: {self.solver_message}")
        return ", ".join(details)


class DataError(RuntimeError):
    def __init__(self, msg: str, path: Optional[str] = None, line_no: Optional[int] = None):
        super().__init__(msg)
        self.path = path
        self.line_no = line_no

    def __str__(self) -> str:
        if self.path is None:
            return self.args[0]
        if self.line_no is None:
            return f"{self.path}: {self.args[0]}"
        return f"{self.path}:{self.line_no}: {self.args[0]}"
