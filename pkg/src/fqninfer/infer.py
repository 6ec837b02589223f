"""Variable-length masked-span prediction at type-inference points.

For one inference point, the surrounding code is turned into a family of
fill-in-blank prompts, one per candidate span length L: a type name gets L
mask tokens prepended (standing for the package prefix and its trailing
dot), a receiver variable is replaced outright by L mask tokens (standing
for the whole FQN). Each prompt is scored by a fill-mask backend; the length
whose per-position argmax probabilities aggregate best wins, and its argmax
tokens are decoded into the predicted fully qualified name.

Prompts here are shaped exactly like the training prompts from
``promptgen``: the same context-line collection, the same FQN expansion of
known annotations, the same window truncation.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from fqninfer.backend import FillMaskBackend, ScoreRequest
from fqninfer.corpus import AnnotatedUnit, SourceUnit, split_lines
from fqninfer.detect import RECEIVER, InferencePoint, find_points
from fqninfer.errors import (
    DecodeError,
    FqnInferError,
    MalformedRecord,
    PointNotFound,
    UnknownTokenPresent,
)
from fqninfer.promptgen import (
    DEFAULT_CONTEXT_LINES,
    DEFAULT_WINDOW,
    collect_context,
    expand_line,
    fit_window,
)
from fqninfer.tokenizer import Vocab, detokenize, tokenize

logger = logging.getLogger(__name__)

LEAVE_ONE_OUT = "leave_one_out"
ALL_UNKNOWN = "all_unknown"
SETTINGS = (LEAVE_ONE_OUT, ALL_UNKNOWN)

ARITHMETIC_MEAN = "arithmetic"
GEOMETRIC_MEAN = "geometric"

DEFAULT_MIN_LEN = 3
DEFAULT_MAX_LEN = 69


@dataclass(frozen=True)
class SpanSearchConfig:
    """Bounds and scoring knobs for the mask-span length sweep."""

    min_len: int = DEFAULT_MIN_LEN
    max_len: int = DEFAULT_MAX_LEN
    aggregate: str = ARITHMETIC_MEAN
    window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        if not 1 <= self.min_len <= self.max_len:
            raise MalformedRecord(
                f"need 1 <= min_len <= max_len, got [{self.min_len}, {self.max_len}]"
            )
        if self.aggregate not in (ARITHMETIC_MEAN, GEOMETRIC_MEAN):
            raise MalformedRecord(f"unknown aggregate {self.aggregate!r}")
        if self.window < 1:
            raise MalformedRecord("window must be >= 1")


@dataclass(frozen=True)
class CodePrompt:
    """An inference prompt: tokens with one contiguous run of mask tokens.

    ``mask_span`` is (first_position, length). Under the leave-one-out
    setting every known FQN other than the point itself is written out in
    full; under the all-unknown setting every name stays as the code wrote
    it.
    """

    tokens: tuple[str, ...]
    mask_span: tuple[int, int]
    point: InferencePoint
    setting: str


@dataclass(frozen=True)
class Prediction:
    """The winning decoded FQN for one inference point."""

    fqn: str
    span_len: int
    score: float
    per_token: tuple[tuple[str, float], ...]
    runner_ups: tuple[tuple[int, float], ...] = ()
    fallback: bool = False


@dataclass(frozen=True)
class PointResult:
    """One point's outcome in a batch run: a prediction or an error note."""

    point: InferencePoint
    prediction: Prediction | None = None
    error: str | None = None


def _as_annotated(partial) -> AnnotatedUnit:
    if isinstance(partial, AnnotatedUnit):
        return partial
    if isinstance(partial, SourceUnit):
        return AnnotatedUnit(
            unit=partial, lines=split_lines(partial.raw_text), annotations=()
        )
    raise MalformedRecord(
        f"expected SourceUnit or AnnotatedUnit, got {type(partial).__name__}"
    )


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def build_code_prompt(
    partial,
    point: InferencePoint,
    L: int,
    setting: str = LEAVE_ONE_OUT,
    t: int = DEFAULT_CONTEXT_LINES,
    vocab: Vocab | None = None,
    *,
    window: int = DEFAULT_WINDOW,
) -> CodePrompt:
    """Build the fill-in-blank prompt for one point at span length ``L``.

    The context block (focus line plus ``t`` code lines each side, window
    truncation) is collected exactly as for training prompts. For a
    declaration or constructor type point the L masks go immediately before
    the simple name; for a receiver point they replace the variable's
    tokens.
    """
    if vocab is None:
        raise MalformedRecord("a vocabulary is required to build prompts")
    if L < 1:
        raise MalformedRecord(f"span length must be >= 1, got {L}")
    if setting not in SETTINGS:
        raise MalformedRecord(f"unknown prompt setting {setting!r}")
    annotated = _as_annotated(partial)
    if not 0 <= point.line_index < len(annotated.lines):
        raise PointNotFound(
            f"unit {annotated.unit.id!r} has no line {point.line_index}"
        )
    line = annotated.lines[point.line_index]
    s, e = point.char_span
    if not (0 <= s < e <= len(line.text)) or line.text[s:e] != point.simple_name:
        raise PointNotFound(
            f"line {point.line_index} does not read {point.simple_name!r} at "
            f"{point.char_span}"
        )

    def line_annotations(index: int):
        if setting != LEAVE_ONE_OUT:
            return ()
        anns = annotated.annotations_on(index)
        if index != point.line_index:
            return anns
        return tuple(a for a in anns if not _overlaps(a.char_span, (s, e)))

    block = collect_context(annotated, point.line_index, t)
    focus_text, _, offset_map = expand_line(
        line.text, line_annotations(point.line_index)
    )
    s2, e2 = offset_map[s], offset_map[e]
    focus_seq = tokenize(focus_text, vocab)
    name_idx = [
        i
        for i, span in enumerate(focus_seq.origin_spans)
        if s2 <= span[0] and span[1] <= e2
    ]
    if not name_idx or name_idx != list(range(name_idx[0], name_idx[-1] + 1)):
        raise PointNotFound(
            f"could not anchor {point.simple_name!r} in the tokenized line"
        )
    first = name_idx[0]
    masks = [vocab.mask_token] * L
    if point.kind == RECEIVER:
        focus_tokens = (
            list(focus_seq.tokens[:first]) + masks + list(focus_seq.tokens[name_idx[-1] + 1 :])
        )
    else:
        focus_tokens = (
            list(focus_seq.tokens[:first]) + masks + list(focus_seq.tokens[first:])
        )

    def context_tokens(code_line):
        text, _, _ = expand_line(code_line.text, line_annotations(code_line.index))
        return tokenize(text, vocab)

    prefix_seqs = [context_tokens(cl) for cl in block.prefix_lines]
    suffix_seqs = [context_tokens(cl) for cl in block.suffix_lines]
    prefix_seqs, suffix_seqs = fit_window(
        prefix_seqs, len(focus_tokens), suffix_seqs, window
    )
    offset = sum(len(seq) for seq in prefix_seqs)
    tokens = [tok for seq in prefix_seqs for tok in seq.tokens]
    tokens.extend(focus_tokens)
    for seq in suffix_seqs:
        tokens.extend(seq.tokens)
    return CodePrompt(
        tokens=tuple(tokens),
        mask_span=(offset + first, L),
        point=point,
        setting=setting,
    )


def _aggregate(probs: list[float], how: str) -> float:
    if how == GEOMETRIC_MEAN:
        return math.exp(math.fsum(math.log(p) for p in probs) / len(probs))
    return math.fsum(probs) / len(probs)


def predict_point(
    partial,
    point: InferencePoint,
    backend: FillMaskBackend,
    cfg: SpanSearchConfig = SpanSearchConfig(),
    *,
    vocab: Vocab,
    setting: str = LEAVE_ONE_OUT,
    t: int = DEFAULT_CONTEXT_LINES,
) -> Prediction:
    """Sweep span lengths, score each prompt, decode the best length's tokens.

    The chosen length maximizes the aggregate of per-position argmax
    probabilities; ties go to the smaller length. If the winner's argmax
    tokens cannot be decoded (they contain the unknown token), the best
    decodable runner-up is used instead and the prediction is flagged as a
    fallback. Raises :class:`DecodeError` when no length decodes.
    """
    swept: dict[int, tuple[float, list[tuple[str, float]]]] = {}
    for length in range(cfg.min_len, cfg.max_len + 1):
        prompt = build_code_prompt(
            partial, point, length, setting, t, vocab, window=cfg.window
        )
        start, _ = prompt.mask_span
        request = ScoreRequest(
            tokens=prompt.tokens,
            mask_positions=tuple(range(start, start + length)),
            top_k=1,
        )
        distributions = backend.score(request)
        per_token = [(dist[0][0], dist[0][1]) for dist in distributions]
        score = _aggregate([p for _, p in per_token], cfg.aggregate)
        swept[length] = (score, per_token)

    best_len = max(sorted(swept), key=lambda length: swept[length][0])
    runner_ups = tuple((length, swept[length][0]) for length in sorted(swept))
    for length in sorted(swept, key=lambda length: (-swept[length][0], length)):
        score, per_token = swept[length]
        try:
            decoded = detokenize([tok for tok, _ in per_token], vocab)
        except UnknownTokenPresent:
            logger.warning(
                "point %s@%d: span length %d argmax is undecodable",
                point.simple_name,
                point.line_index,
                length,
            )
            continue
        if point.kind == RECEIVER:
            fqn = decoded
        else:
            fqn = decoded + point.simple_name
        return Prediction(
            fqn=fqn,
            span_len=length,
            score=score,
            per_token=tuple(per_token),
            runner_ups=runner_ups,
            fallback=length != best_len,
        )
    raise DecodeError(
        f"no span length in [{cfg.min_len}, {cfg.max_len}] produced a decodable "
        f"prediction for {point.simple_name!r}"
    )


def predict_all(
    partial,
    backend: FillMaskBackend,
    cfg: SpanSearchConfig = SpanSearchConfig(),
    *,
    vocab: Vocab,
    setting: str = LEAVE_ONE_OUT,
    t: int = DEFAULT_CONTEXT_LINES,
    jobs: int = 1,
) -> list[PointResult]:
    """Detect every inference point and predict each one independently.

    Points never see each other's predictions. A failure at one point is
    recorded on its result and does not abort the batch. With ``jobs`` > 1
    points are scored concurrently; output order stays the detection order.
    """
    annotated = _as_annotated(partial)
    points = find_points(annotated.unit)

    def run(point: InferencePoint) -> PointResult:
        try:
            prediction = predict_point(
                annotated, point, backend, cfg, vocab=vocab, setting=setting, t=t
            )
        except FqnInferError as exc:
            logger.warning(
                "point %s@%d failed: %s", point.simple_name, point.line_index, exc
            )
            return PointResult(point=point, error=f"{type(exc).__name__}: {exc}")
        return PointResult(point=point, prediction=prediction)

    if jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, points))
    return [run(point) for point in points]


def point_record(point: InferencePoint) -> dict:
    """JSON shape of a point in CLI output."""
    return {
        "kind": point.kind,
        "line": point.line_index,
        "span": list(point.char_span),
        "name": point.simple_name,
    }


def result_record(result: PointResult) -> dict:
    """JSON shape of one batch entry: the point plus prediction or error."""
    record: dict = {"point": point_record(result.point)}
    if result.prediction is not None:
        record.update(
            fqn=result.prediction.fqn,
            score=result.prediction.score,
            span_len=result.prediction.span_len,
            fallback=result.prediction.fallback,
        )
    else:
        record["error"] = result.error
    return record
