"""Sample semantically equivalent prompt formats and measure how far accuracy moves."""

__version__ = "0.1.0"

from .bandit import SearchConfig, SpreadReport, make_prior, naive_run, run_search  # noqa: E402
from .errors import PromptSpreadError  # noqa: E402
from .grammar import ConstantSets, Format, make_format, render_format, sample_equivalent  # noqa: E402
from .prompts import DataInstance, TaskSpec, build_prompt  # noqa: E402

__all__ = [
    "ConstantSets", "DataInstance", "Format", "PromptSpreadError", "SearchConfig", "SpreadReport",
    "TaskSpec", "__version__", "build_prompt", "make_format", "make_prior", "naive_run",
    "render_format", "run_search", "sample_equivalent",
]
