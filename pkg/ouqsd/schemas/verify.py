from typing import List, Optional

from pydantic import BaseModel, Field


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = Field(default=None, description="Measured quantity")
    threshold: Optional[float] = Field(default=None, description="Bound it is held to")
    detail: str = ""


class VerifyReport(BaseModel):
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]
