"""Task-parallel execution over subdomains and faces."""
from .parallel import ParallelBatch, SubdomainExecutor, get_default_executor

__all__ = ["ParallelBatch", "SubdomainExecutor", "get_default_executor"]
