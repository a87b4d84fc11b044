# app/core/state.py

from typing import Any, Dict, List, Optional, Tuple, TypedDict

class PipelineState(TypedDict, total=False):
    config: Any
    output_dir: str
    workers: int

    model: Optional[Any]
    measures: Optional[Dict[str, Any]]
    pairs: Optional[List[Tuple[str, str]]]
    trajectories: Optional[Dict[str, Any]]

    artifacts: List[str]
    violations: int
    error_message: Optional[str]
    exit_code: Optional[int]
