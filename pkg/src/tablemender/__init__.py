"""tablemender: impute, detect, and correct tabular data with generated snippets."""

from .errors import (
    BackendError,
    ConfigError,
    ExecutorError,
    TableError,
    WrangleTaskError,
)
from .executor import InProcessExecutor, RowResult, SubprocessExecutor
from .gateway import CallLedger, CompletionRequest, ModelGateway, configure_backend
from .kb import (
    KbEntry,
    KbMatch,
    SignatureVector,
    embed_column,
    embed_text,
    ingest_kb,
    retrieve_reference,
)
from .orchestrator import (
    ConsensusResult,
    TaskSpec,
    WrangleReport,
    compute_accuracy,
    consensus,
    route_workflow,
    run_fold,
    run_rowwise_baseline,
    run_task,
    safety_scan,
    select_diverse_samples,
    select_fewshot_examples,
    validate_snippet,
)
from .prompts import PromptBundle, Snippet, build_prompt, build_rowwise_prompt, parse_code
from .relevance import (
    BinnedMatrix,
    BoostModel,
    GbdtParams,
    RelevanceResult,
    bin_features,
    fit_gbdt,
    select_relevant_columns,
)
from .tabular import (
    ColumnProfile,
    FoldPlan,
    Table,
    format_rows,
    ground_truth,
    load_table,
    make_folds,
    profile_columns,
    write_table,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError", "BinnedMatrix", "BoostModel", "CallLedger", "ColumnProfile",
    "CompletionRequest", "ConfigError", "ConsensusResult", "ExecutorError",
    "FoldPlan", "GbdtParams", "InProcessExecutor", "KbEntry", "KbMatch",
    "ModelGateway", "PromptBundle", "RelevanceResult", "RowResult",
    "SignatureVector", "Snippet", "SubprocessExecutor", "Table", "TableError",
    "TaskSpec", "WrangleReport", "WrangleTaskError", "bin_features",
    "build_prompt", "build_rowwise_prompt", "compute_accuracy", "configure_backend",
    "consensus", "embed_column", "embed_text", "fit_gbdt", "format_rows",
    "ground_truth", "ingest_kb", "load_table", "make_folds", "parse_code",
    "profile_columns", "retrieve_reference", "route_workflow", "run_fold",
    "run_rowwise_baseline", "run_task", "safety_scan", "select_diverse_samples",
    "select_fewshot_examples", "select_relevant_columns", "validate_snippet",
    "write_table",
]
