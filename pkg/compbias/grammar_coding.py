"""
Compressed context-free grammars for mappings and their coding length.

Each rule is written ``S<alt>,<alt>,...<message>``; rules are joined by ``;``.
An enumerative rule lists whole objects (one symbol per attribute) sharing a
message, a factored rule maps one attribute value to one code digit.
"""
import heapq
import math
from collections import Counter
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common.errors import EmptySequence
from .common.utils import get_logger
from .mapping_core import (
    AttributeSpace,
    Mapping,
    MappingKind,
    classify,
    coordinate_function,
    enumerate_mappings,
    factored_attribute,
)

logger = get_logger(__name__)

START = "S"
RULE_SEPARATOR = ";"
ALTERNATIVE_SEPARATOR = ","


class GrammarRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    alternatives: Tuple[str, ...] = Field(..., min_length=1)
    message: str = Field(..., min_length=1)
    factored: bool = False
    # ordering key: (coordinate, value) for factored rules, smallest object index otherwise
    order: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_alternatives(self):
        if any(not alt for alt in self.alternatives):
            raise ValueError("empty alternative")
        return self

    def render(self) -> str:
        return START + ALTERNATIVE_SEPARATOR.join(self.alternatives) + self.message


Grammar = List[GrammarRule]


class CodeSequence(BaseModel):
    model_config = ConfigDict(frozen=True)

    symbols: Tuple[str, ...]

    @property
    def text(self) -> str:
        return "".join(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    @classmethod
    def from_text(cls, text: str) -> "CodeSequence":
        return cls(symbols=tuple(text))


def _alternative_key(space: AttributeSpace, index: int) -> Tuple[int, ...]:
    # last attribute most significant: bx, rx, bc, rc
    return tuple(reversed(space.attributes_of(index)))


def _enumerative_rules(mapping: Mapping, coordinates: List[int]) -> Grammar:
    """One rule per distinct message over ``coordinates``."""
    space = mapping.space
    groups: Dict[str, List[int]] = {}
    for index in range(space.num_objects):
        digits = mapping.code_digits(index)
        message = "".join(str(digits[i]) for i in coordinates)
        groups.setdefault(message, []).append(index)

    rules = []
    for message, members in groups.items():
        ordered = sorted(members, key=lambda i: _alternative_key(space, i))
        rules.append(GrammarRule(
            alternatives=tuple(space.object_symbols(i) for i in ordered),
            message=message,
            order=(min(members),),
        ))
    return sorted(rules, key=lambda r: r.order)


def _factored_assignment(mapping: Mapping) -> Dict[int, int]:
    """coordinate -> attribute for coordinates that encode one attribute, first coordinate wins."""
    assignment: Dict[int, int] = {}
    used = set()
    for i in range(mapping.space.num_attributes):
        a = factored_attribute(mapping, i)
        if a is not None and a not in used:
            assignment[i] = a
            used.add(a)
    return assignment


def _factored_grammar(mapping: Mapping, assignment: Dict[int, int]) -> Grammar:
    space = mapping.space
    rules: Grammar = []
    for i in sorted(assignment):
        a = assignment[i]
        f = coordinate_function(mapping, i, a)
        for v in range(space.values_per_attribute):
            rules.append(GrammarRule(
                alternatives=(space.symbols[a][v],),
                message=str(f[v]),
                factored=True,
                order=(i, v),
            ))
    rest = [i for i in range(space.num_attributes) if i not in assignment]
    if rest:
        rules.extend(_enumerative_rules(mapping, rest))
    return rules


def build_grammar(mapping: Mapping) -> Grammar:
    """Cheapest of the enumerative grammar and the (partially) factored grammar."""
    candidates = [_enumerative_rules(mapping, list(range(mapping.space.num_attributes)))]
    assignment = _factored_assignment(mapping)
    if assignment:
        candidates.append(_factored_grammar(mapping, assignment))
    # min keeps the first candidate on ties, so enumerative wins them
    return min(candidates, key=lambda g: coding_length(serialize(g)))


def serialize(grammar: Grammar) -> CodeSequence:
    factored = [r for r in grammar if r.factored]
    enumerative = [r for r in grammar if not r.factored]
    ordered = sorted(factored, key=lambda r: r.order) + sorted(enumerative, key=lambda r: r.order)
    return CodeSequence.from_text(RULE_SEPARATOR.join(r.render() for r in ordered))


def coding_length(seq: CodeSequence) -> float:
    """-sum log2 p(s_i) with p the empirical character frequency inside ``seq``."""
    n = len(seq)
    if n == 0:
        raise EmptySequence("cannot code an empty sequence")
    counts = Counter(seq.symbols)
    return math.fsum(c * math.log2(n / c) for c in counts.values())


def huffman_bits(seq: CodeSequence) -> int:
    """Total length of ``seq`` under a Huffman code built from its own character counts."""
    n = len(seq)
    if n == 0:
        raise EmptySequence("cannot code an empty sequence")
    counts = Counter(seq.symbols)
    if len(counts) == 1:
        return n
    # (weight, tiebreak, depth-per-symbol) so the heap never compares dicts
    heap = [(c, s, {s: 0}) for s, c in sorted(counts.items())]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, t1, d1 = heapq.heappop(heap)
        w2, t2, d2 = heapq.heappop(heap)
        merged = {s: d + 1 for s, d in d1.items()}
        merged.update({s: d + 1 for s, d in d2.items()})
        heapq.heappush(heap, (w1 + w2, min(t1, t2), merged))
    depths = heap[0][2]
    return sum(counts[s] * depths[s] for s in counts)


def cl(mapping: Mapping) -> float:
    return coding_length(serialize(build_grammar(mapping)))


class ComplexityRow(BaseModel):
    mapping_id: int
    kind: MappingKind
    image_size: int
    sequence: str
    sequence_length: int
    cl_bits: float
    huffman_bits: int


def complexity_table(space: AttributeSpace, mappings: Optional[List[Mapping]] = None) -> List[ComplexityRow]:
    rows = []
    for mapping in mappings if mappings is not None else enumerate_mappings(space):
        seq = serialize(build_grammar(mapping))
        rows.append(ComplexityRow(
            mapping_id=mapping.mapping_id,
            kind=classify(mapping).kind,
            image_size=mapping.image_size,
            sequence=seq.text,
            sequence_length=len(seq),
            cl_bits=coding_length(seq),
            huffman_bits=huffman_bits(seq),
        ))
    return rows


def ordering_violations(rows: List[ComplexityRow]) -> List[int]:
    """Non-bijections whose CL exceeds the cheapest bijection; logged, never raised."""
    bijective = [r.cl_bits for r in rows if r.kind in (MappingKind.HOLISTIC, MappingKind.COMPOSITIONAL)]
    if not bijective:
        return []
    threshold = min(bijective)
    violations = [
        r.mapping_id for r in rows
        if r.kind in (MappingKind.NON_BIJECTION, MappingKind.FULLY_DEGENERATE) and r.cl_bits > threshold
    ]
    if violations:
        logger.warning("%d non-bijections have CL above the cheapest bijection (%.3f bits)", len(violations), threshold)
    return violations
