"""Planner-executor-summarizer agent over pluggable model backends."""

from .backends import (
    Backend,
    FixtureSearchBackend,
    HTTPBackend,
    HTTPSearchBackend,
    MockPlannerBackend,
    MockSummarizerBackend,
    MockVLMBackend,
)
from .planning import (
    Plan,
    ToolCall,
    VALID_TOOLS,
    load_planner_prompt,
    parse_plan_text,
    plan,
)
from .runtime import (
    AgentConfig,
    ExecutionResult,
    StepRecord,
    execute,
    run_query,
    summarize,
    validate_bindings,
)
from .tools import Toolbox

__all__ = [
    "AgentConfig",
    "Backend",
    "ExecutionResult",
    "FixtureSearchBackend",
    "HTTPBackend",
    "HTTPSearchBackend",
    "MockPlannerBackend",
    "MockSummarizerBackend",
    "MockVLMBackend",
    "Plan",
    "StepRecord",
    "ToolCall",
    "Toolbox",
    "VALID_TOOLS",
    "execute",
    "load_planner_prompt",
    "parse_plan_text",
    "plan",
    "run_query",
    "summarize",
    "validate_bindings",
]
