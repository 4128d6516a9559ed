class RTAError(Exception):
    """
    Base error for the whole framework.

    - code: short machine-readable string (e.g. "overlapping_io")
    - detail: human-readable explanation
    """

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail or code
        super().__init__(f"{code}: {self.detail}")

    def to_dict(self):
        return {"error": self.code, "detail": self.detail}


class ModelError(RTAError):
    pass
