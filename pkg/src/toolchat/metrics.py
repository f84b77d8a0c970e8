"""Tool-use metrics: success rates of thought/action/arguments, overall
success, and token-overlap IoU.

The BLEU variant is pinned: modified n-gram precisions for n = 1..4 over
lowercased whitespace tokens, geometric mean with add-one smoothing of the
match and total counts for n >= 2 whenever a precision would be zero, and
brevity penalty exp(1 - r/c) when the candidate is shorter than the
reference.  Argument scores use exact match for file arguments and BLEU for
text arguments; a prediction counts as an overall success when thought and
action match and every argument component clears its threshold (file: equal;
text: BLEU >= the configured threshold, 0.5 by default).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyRun
from .graphs import Binding, ToolGraph, render_tool_graph
from .invocation import ToolInvocation, render_invocation
from .registry import ToolCatalog

BLEU_MAX_ORDER = 4
DEFAULT_BLEU_THRESHOLD = 0.5

BLEU_CONFIG = {
    "max_order": BLEU_MAX_ORDER,
    "tokenizer": "lowercase whitespace",
    "smoothing": "add-one counts for n >= 2 when a precision is zero",
    "brevity_penalty": "exp(1 - r/c) when c < r",
}


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str) -> float:
    """Sentence BLEU in [0, 1]; empty candidates score 0."""
    cand = _tokens(candidate)
    ref = _tokens(reference)
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        total = max(c - n + 1, 0)
        matches = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
        if matches == 0:
            if n == 1:
                return 0.0
            precision = (matches + 1) / (total + 1)
        else:
            precision = matches / total
        log_sum += math.log(precision) / BLEU_MAX_ORDER
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum)


def text_iou(candidate: str, reference: str) -> float:
    """Token-set intersection over union; two empty texts count as identical."""
    a, b = set(_tokens(candidate)), set(_tokens(reference))
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class FieldScores:
    thought: int
    action: int
    args: float
    success: int
    iou: float


def render_gold(gold: ToolInvocation | ToolGraph) -> str:
    if isinstance(gold, ToolGraph):
        return render_tool_graph(gold)
    return render_invocation(gold)


def _arg_kind(catalog: ToolCatalog | None, tool: str | None, arg_name: str, position: int) -> str:
    if catalog is None or tool is None or tool not in catalog.cards:
        return "text"
    card = catalog.cards[tool]
    for spec in card.args:
        if spec.name == arg_name:
            return spec.kind
    if position < len(card.args):
        return card.args[position].kind
    return "text"


def _component(kind: str, predicted: str | None, expected: str) -> float:
    if predicted is None:
        return 0.0
    if kind == "file_ref":
        return 1.0 if predicted == expected else 0.0
    return bleu(predicted, expected)


def _component_passes(kind: str, score: float, threshold: float) -> bool:
    if kind == "file_ref":
        return score == 1.0
    return score >= threshold


def _score_invocation_pair(
    pred: ToolInvocation,
    gold: ToolInvocation,
    catalog: ToolCatalog | None,
    threshold: float,
) -> tuple[int, int, float, int]:
    thought = int(pred.use_tool == gold.use_tool)
    action = int(pred.action == gold.action)
    if not gold.use_tool:
        args_score = 1.0
        success = int(thought == 1 and action == 1)
        return thought, action, args_score, success
    components: list[tuple[str, float]] = []
    if gold.raw_input is not None:
        kind = _arg_kind(catalog, gold.action, "", 0)
        predicted = pred.raw_input
        if predicted is None and len(pred.args) == 1:
            predicted = next(iter(pred.args.values()))
        components.append((kind, _component(kind, predicted, gold.raw_input)))
    else:
        for position, (name, expected) in enumerate(gold.args.items()):
            kind = _arg_kind(catalog, gold.action, name, position)
            predicted = pred.args.get(name)
            if predicted is None and len(gold.args) == 1 and pred.raw_input is not None:
                predicted = pred.raw_input
            components.append((kind, _component(kind, predicted, expected)))
    if components:
        args_score = sum(score for _, score in components) / len(components)
        all_pass = all(_component_passes(kind, score, threshold) for kind, score in components)
    else:
        args_score = 1.0
        all_pass = True
    success = int(thought == 1 and action == 1 and all_pass)
    return thought, action, args_score, success


def _binding_text(binding: Binding) -> str:
    if binding.kind == "literal":
        return binding.text
    if binding.kind == "user_image":
        return f"{{{{image_{binding.index}}}}}"
    return f"{{{{step_{binding.index}.output}}}}"


def _score_graph_pair(
    pred: ToolInvocation | ToolGraph,
    gold: ToolGraph,
    catalog: ToolCatalog | None,
    threshold: float,
) -> tuple[int, int, float, int]:
    # A tool graph implies "use a tool"; any tool-using prediction matches on thought.
    if isinstance(pred, ToolGraph):
        pred_uses_tool = True
    else:
        pred_uses_tool = pred.use_tool
    thought = int(pred_uses_tool)
    if not isinstance(pred, ToolGraph):
        return thought, 0, 0.0, 0
    gold_tools = [s.tool for s in gold.steps]
    pred_tools = [s.tool for s in pred.steps]
    action = int(gold_tools == pred_tools)
    components: list[tuple[str, float]] = []
    for si, gstep in enumerate(gold.steps):
        pstep = pred.steps[si] if si < len(pred.steps) else None
        for ai, (name, gbind) in enumerate(gstep.bindings):
            expected = _binding_text(gbind)
            predicted = None
            if pstep is not None and ai < len(pstep.bindings):
                predicted = _binding_text(pstep.bindings[ai][1])
            if gbind.kind != "literal":
                kind = "file_ref"  # placeholders must match exactly
            else:
                kind = _arg_kind(catalog, gstep.tool, name, ai)
            components.append((kind, _component(kind, predicted, expected)))
    if components:
        args_score = sum(score for _, score in components) / len(components)
        all_pass = all(_component_passes(kind, score, threshold) for kind, score in components)
    else:
        args_score = 1.0
        all_pass = True
    success = int(thought == 1 and action == 1 and all_pass)
    return thought, action, args_score, success


def score_invocation(
    raw_emission: str,
    parsed: ToolInvocation | ToolGraph | None,
    gold: ToolInvocation | ToolGraph,
    catalog: ToolCatalog | None = None,
    bleu_threshold: float = DEFAULT_BLEU_THRESHOLD,
) -> FieldScores:
    """Score one prediction against its gold; total over parse failures.

    An unparseable emission zeroes every component except IoU, which is still
    computed between the raw emission and the rendered gold.
    """
    iou = text_iou(raw_emission, render_gold(gold))
    if parsed is None:
        return FieldScores(thought=0, action=0, args=0.0, success=0, iou=iou)
    if isinstance(gold, ToolGraph):
        thought, action, args_score, success = _score_graph_pair(
            parsed, gold, catalog, bleu_threshold
        )
    else:
        if isinstance(parsed, ToolGraph):
            # Gold is a single call; a graph prediction used tools but named
            # no single action to compare.
            thought = int(gold.use_tool)
            action, args_score, success = 0, 0.0, 0
        else:
            thought, action, args_score, success = _score_invocation_pair(
                parsed, gold, catalog, bleu_threshold
            )
    return FieldScores(thought=thought, action=action, args=args_score, success=success, iou=iou)


@dataclass(frozen=True)
class MetricReport:
    n: int
    sr_t: float
    sr_act: float
    sr_args: float
    sr: float
    iou: float
    per_split: dict[str, "MetricReport"] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "n": self.n,
            "sr_t": self.sr_t,
            "sr_act": self.sr_act,
            "sr_args": self.sr_args,
            "sr": self.sr,
            "iou": self.iou,
        }
        if self.per_split:
            out["per_split"] = {k: v.as_dict() for k, v in self.per_split.items()}
        return out


def _mean_report(scores: list[FieldScores]) -> MetricReport:
    n = len(scores)
    return MetricReport(
        n=n,
        sr_t=sum(s.thought for s in scores) / n,
        sr_act=sum(s.action for s in scores) / n,
        sr_args=sum(s.args for s in scores) / n,
        sr=sum(s.success for s in scores) / n,
        iou=sum(s.iou for s in scores) / n,
    )


def aggregate(scored: list[tuple[FieldScores, str]]) -> MetricReport:
    """Arithmetic means over all records plus a per-split breakdown."""
    if not scored:
        raise EmptyRun("no records to aggregate")
    overall = _mean_report([s for s, _ in scored])
    splits: dict[str, list[FieldScores]] = {}
    for s, split in scored:
        splits.setdefault(split, []).append(s)
    per_split = {split: _mean_report(items) for split, items in sorted(splits.items())}
    return MetricReport(
        n=overall.n,
        sr_t=overall.sr_t,
        sr_act=overall.sr_act,
        sr_args=overall.sr_args,
        sr=overall.sr,
        iou=overall.iou,
        per_split=per_split,
    )
