"""debtscope: keyword filtering, active learning and local explanations
for triaging architecture-debt candidates in issue-tracker exports."""

__version__ = "0.1.0"
