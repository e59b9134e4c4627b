"""Exception hierarchy. Messages carry the tag of the module that raised them."""


class FlabError(Exception):
    def __init__(self, message: str, module: str = "flab"):
        self.module = module
        super().__init__(f"[{module}] {message}")


class RangeError(FlabError, ValueError):
    pass


class UsageError(FlabError, ValueError):
    pass


class SchemaError(FlabError, ValueError):
    pass


class UnsupportedDataError(FlabError, ValueError):
    pass


class ParseError(FlabError, ValueError):
    def __init__(self, message: str, line: int, module: str = "harness"):
        self.line = line
        super().__init__(f"line {line}: {message}", module)


class TrainingError(FlabError, RuntimeError):
    def __init__(self, message: str, epoch: int):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}", "tinynet")
