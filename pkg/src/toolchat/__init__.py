"""toolchat: a tool-orchestrating chat agent for human-centric vision tools.

The library covers the whole loop: a tool catalog with question-answer
documents, retrieval of in-context examples, prompt composition and emission
parsing (single calls and tool graphs), graph execution against pluggable
adapters, result transformation and discrimination, a benchmark harness with
tool-use metrics, and an HTTP chat service.
"""

from .artifacts import ArtifactStore, ArtifactValue
from .backends import RemoteChatBackend, ScriptedBackend
from .benchmark import (
    BenchmarkRecord,
    PredictionRecord,
    Turn,
    load_dataset,
    replay_rules,
    run_benchmark,
    save_dataset,
    write_scripted_fixture,
)
from .errors import ToolchatError
from .executor import (
    ExecutionTrace,
    HttpToolAdapter,
    StepResult,
    bind_arguments,
    execute_graph,
    execute_graph_sequential,
)
from .graphs import (
    Binding,
    GraphShape,
    GraphStep,
    ToolGraph,
    ValidatedGraph,
    classify_shape,
    parse_tool_graph,
    render_tool_graph,
    validate_graph,
)
from .integration import (
    ChoiceSet,
    MeasurementSet,
    ShapeMeasurementModel,
    VertexPartMap,
    discriminate_modify,
    discriminate_select,
    format_choices,
    render_pose_placeholder,
    synthesize_response,
    transform_contact,
    transform_shape,
)
from .invocation import ToolInvocation, parse_invocation, render_invocation
from .metrics import MetricReport, aggregate, bleu, score_invocation, text_iou
from .mocks import build_mock_adapters
from .pipeline import ChatPipeline, TurnEvent
from .planner import PromptContext, compose_plan_prompt, parse_emission, plan
from .registry import (
    ArgSpec,
    QAPair,
    ToolCard,
    ToolCatalog,
    ToolDocument,
    default_catalog,
    load_catalog,
    register_tool,
    render_tool_definitions,
    save_catalog,
)
from .retrieval import (
    DeterministicEmbedder,
    EmbeddingVector,
    IndexedExample,
    RemoteEmbedder,
    RetrievalIndex,
    build_index,
    cosine,
    embed,
    retrieve,
)

__version__ = "0.1.0"
