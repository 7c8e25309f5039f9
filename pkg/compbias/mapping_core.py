"""
Mapping enumeration, classification and Kolmogorov-complexity upper bounds.

A mapping assigns every object of the attribute space G (all V^L attribute
tuples) one code of the code space Z (all V^L digit strings). Objects and
codes are both indexed mixed-radix with the first attribute / first digit
most significant, so for Toy256 blue box = 0, blue circle = 1, red box = 2,
red circle = 3 and code 2 = "10".
"""
import itertools
import math
import string
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common.errors import CountExceedsLimit, InvalidK, NotABijection

DEFAULT_LIMIT = 10 ** 6

RESERVED_SYMBOLS = frozenset("S;," + string.digits)
GENERIC_ALPHABET = [c for c in string.ascii_lowercase + string.ascii_uppercase if c not in RESERVED_SYMBOLS]


# ---------- spaces and mappings ----------

class AttributeSpace(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_attributes: int = Field(..., ge=1, description="L")
    values_per_attribute: int = Field(..., ge=2, le=10, description="V")
    attribute_names: Tuple[Tuple[str, ...], ...]
    symbols: Tuple[Tuple[str, ...], ...] = Field(..., description="one code character per attribute value")

    @model_validator(mode="after")
    def _check_shape(self):
        for field in (self.attribute_names, self.symbols):
            if len(field) != self.num_attributes:
                raise ValueError("expected one entry per attribute")
            for values in field:
                if len(values) != self.values_per_attribute or len(set(values)) != len(values):
                    raise ValueError("every attribute needs exactly V distinct values")
        flat = [s for values in self.symbols for s in values]
        if len(set(flat)) != len(flat):
            raise ValueError("attribute symbols must be distinct across attributes")
        for s in flat:
            if len(s) != 1 or s in RESERVED_SYMBOLS:
                raise ValueError(f"invalid attribute symbol {s!r}")
        return self

    @classmethod
    def toy256(cls) -> "AttributeSpace":
        return cls(
            num_attributes=2,
            values_per_attribute=2,
            attribute_names=(("blue", "red"), ("box", "circle")),
            symbols=(("b", "r"), ("x", "c")),
        )

    @classmethod
    def generic(cls, num_attributes: int, values_per_attribute: int) -> "AttributeSpace":
        """Space with placeholder names and consecutive letters as symbols."""
        needed = num_attributes * values_per_attribute
        if needed > len(GENERIC_ALPHABET):
            raise ValueError(f"at most {len(GENERIC_ALPHABET)} attribute values can be given symbols")
        letters = iter(GENERIC_ALPHABET)
        symbols = tuple(tuple(next(letters) for _ in range(values_per_attribute)) for _ in range(num_attributes))
        names = tuple(
            tuple(f"a{a}v{v}" for v in range(values_per_attribute)) for a in range(num_attributes)
        )
        return cls(
            num_attributes=num_attributes,
            values_per_attribute=values_per_attribute,
            attribute_names=names,
            symbols=symbols,
        )

    @property
    def num_objects(self) -> int:
        return self.values_per_attribute ** self.num_attributes

    def digits(self, index: int) -> Tuple[int, ...]:
        """Mixed-radix digits of an object or code index, most significant first."""
        out = []
        for _ in range(self.num_attributes):
            index, d = divmod(index, self.values_per_attribute)
            out.append(d)
        return tuple(reversed(out))

    def attributes_of(self, index: int) -> Tuple[int, ...]:
        return self.digits(index)

    def index_of(self, values: Tuple[int, ...]) -> int:
        index = 0
        for v in values:
            index = index * self.values_per_attribute + v
        return index

    def object_symbols(self, index: int) -> str:
        return "".join(self.symbols[a][v] for a, v in enumerate(self.attributes_of(index)))

    def object_name(self, index: int) -> str:
        return " ".join(self.attribute_names[a][v] for a, v in enumerate(self.attributes_of(index)))

    def code_string(self, code: int) -> str:
        return "".join(str(d) for d in self.digits(code))


class Mapping(BaseModel):
    model_config = ConfigDict(frozen=True)

    table: Tuple[int, ...] = Field(..., description="entry i is the code assigned to object i")
    space: AttributeSpace

    @model_validator(mode="after")
    def _check_table(self):
        n = self.space.num_objects
        if len(self.table) != n:
            raise ValueError(f"table must have {n} entries, got {len(self.table)}")
        if any(z < 0 or z >= n for z in self.table):
            raise ValueError(f"codes must lie in [0, {n})")
        return self

    @classmethod
    def from_id(cls, space: AttributeSpace, mapping_id: int) -> "Mapping":
        n = space.num_objects
        if not 0 <= mapping_id < n ** n:
            raise ValueError(f"mapping_id out of range [0, {n ** n})")
        table = []
        for _ in range(n):
            mapping_id, z = divmod(mapping_id, n)
            table.append(z)
        return cls(table=tuple(reversed(table)), space=space)

    @property
    def mapping_id(self) -> int:
        """Position in lexicographic table order, i.e. the table read as a base-V^L number."""
        n = self.space.num_objects
        mapping_id = 0
        for z in self.table:
            mapping_id = mapping_id * n + z
        return mapping_id

    @property
    def image_size(self) -> int:
        return len(set(self.table))

    @property
    def is_bijection(self) -> bool:
        return self.image_size == self.space.num_objects

    def code_digits(self, index: int) -> Tuple[int, ...]:
        return self.space.digits(self.table[index])

    def code_string(self, index: int) -> str:
        return self.space.code_string(self.table[index])

    def table_string(self) -> str:
        return "-".join(str(z) for z in self.table)


# ---------- classification ----------

class MappingKind(str, Enum):
    FULLY_DEGENERATE = "fully_degenerate"
    NON_BIJECTION = "non_bijection"
    HOLISTIC = "holistic_bijection"
    COMPOSITIONAL = "compositional_bijection"


class CompositionalWitness(BaseModel):
    model_config = ConfigDict(frozen=True)

    attribute_assignment: Tuple[int, ...] = Field(..., description="coordinate i reads attribute assignment[i]")
    value_codes: Tuple[Tuple[int, ...], ...] = Field(..., description="digit written for each attribute value")

    def apply(self, space: AttributeSpace) -> Tuple[int, ...]:
        table = []
        for index in range(space.num_objects):
            values = space.attributes_of(index)
            digits = tuple(
                self.value_codes[i][values[a]] for i, a in enumerate(self.attribute_assignment)
            )
            table.append(space.index_of(digits))
        return tuple(table)


class MappingClass(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: MappingKind
    degenerate_image_size: int
    witness: Optional[CompositionalWitness] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if (self.kind == MappingKind.FULLY_DEGENERATE) != (self.degenerate_image_size == 1):
            raise ValueError("fully degenerate iff image size is 1")
        if (self.witness is not None) != (self.kind == MappingKind.COMPOSITIONAL):
            raise ValueError("a witness is present iff the mapping is compositional")
        return self


def coordinate_function(mapping: Mapping, coordinate: int, attribute: int) -> Optional[Tuple[int, ...]]:
    """
    Value table of code digit ``coordinate`` as a function of ``attribute`` alone,
    or None when the digit also depends on other attributes.
    """
    space = mapping.space
    f: List[Optional[int]] = [None] * space.values_per_attribute
    for index in range(space.num_objects):
        v = space.attributes_of(index)[attribute]
        d = mapping.code_digits(index)[coordinate]
        if f[v] is None:
            f[v] = d
        elif f[v] != d:
            return None
    return tuple(f)


def _is_bijective(f: Tuple[int, ...]) -> bool:
    return len(set(f)) == len(f)


def find_witness(mapping: Mapping) -> Optional[CompositionalWitness]:
    """Brute force over S_L: every coordinate must be a bijection of its own attribute."""
    L = mapping.space.num_attributes
    for perm in itertools.permutations(range(L)):
        codes = []
        for i, a in enumerate(perm):
            f = coordinate_function(mapping, i, a)
            if f is None or not _is_bijective(f):
                break
            codes.append(f)
        else:
            return CompositionalWitness(attribute_assignment=perm, value_codes=tuple(codes))
    return None


def classify(mapping: Mapping) -> MappingClass:
    image = mapping.image_size
    if image == 1:
        return MappingClass(kind=MappingKind.FULLY_DEGENERATE, degenerate_image_size=image)
    if image < mapping.space.num_objects:
        return MappingClass(kind=MappingKind.NON_BIJECTION, degenerate_image_size=image)
    witness = find_witness(mapping)
    if witness is None:
        return MappingClass(kind=MappingKind.HOLISTIC, degenerate_image_size=image)
    return MappingClass(kind=MappingKind.COMPOSITIONAL, degenerate_image_size=image, witness=witness)


def factored_attribute(mapping: Mapping, coordinate: int) -> Optional[int]:
    """The single attribute that code digit ``coordinate`` is a bijective function of, if any."""
    for a in range(mapping.space.num_attributes):
        f = coordinate_function(mapping, coordinate, a)
        if f is not None and _is_bijective(f):
            return a
    return None


def compositional_degree(mapping: Mapping) -> int:
    """Number of distinct attributes that some code digit encodes on its own (k of S_V^k ⋊ S_k)."""
    attributes = {factored_attribute(mapping, i) for i in range(mapping.space.num_attributes)}
    attributes.discard(None)
    return len(attributes)


def enumerate_mappings(space: AttributeSpace, limit: int = DEFAULT_LIMIT) -> List[Mapping]:
    n = space.num_objects
    count = n ** n
    if count > limit:
        raise CountExceedsLimit(f"{count} mappings for L={space.num_attributes}, V={space.values_per_attribute} exceed limit {limit}")
    # tables are valid by construction
    return [Mapping.model_construct(table=table, space=space) for table in itertools.product(range(n), repeat=n)]


# ---------- permutation encoding ----------

class PermutationEncoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    sequence: Tuple[int, ...]

    @model_validator(mode="after")
    def _check_permutation(self):
        if sorted(self.sequence) != list(range(1, len(self.sequence) + 1)):
            raise ValueError("sequence must be a permutation of 1..V^L")
        return self

    def decode(self, space: AttributeSpace) -> Mapping:
        return Mapping(table=tuple(s - 1 for s in self.sequence), space=space)


def permutation_encoding(mapping: Mapping) -> PermutationEncoding:
    if not mapping.is_bijection:
        raise NotABijection(f"mapping {mapping.mapping_id} has image size {mapping.image_size}")
    return PermutationEncoding(sequence=tuple(z + 1 for z in mapping.table))


# ---------- complexity bounds ----------

def _check_lv(L: int, V: int, min_L: int = 1):
    if L < min_L or V < 2:
        raise ValueError(f"need L >= {min_L} and V >= 2, got L={L}, V={V}")


def k_bound_bijection(L: int, V: int) -> float:
    """Bits to spell out an arbitrary bijection as a permuted sequence of length V^L."""
    _check_lv(L, V)
    return V ** L * L * math.log2(V)


def k_bound_comp(L: int, V: int) -> float:
    _check_lv(L, V)
    return V * math.log2(V) + L * math.log2(L)


class GammaRatio(NamedTuple):
    gamma: float
    lower_bound: float
    bound_holds: bool


def gamma_ratio(L: int, V: int) -> GammaRatio:
    _check_lv(L, V, min_L=2)
    gamma = k_bound_bijection(L, V) / k_bound_comp(L, V)
    if L <= V:
        lower = V ** (L - 1) * L / 2
    else:
        lower = V ** L * math.log2(V) / (2 * math.log2(L))
    # equality at L == V, so compare with a relative tolerance
    return GammaRatio(gamma=gamma, lower_bound=lower, bound_holds=gamma >= lower * (1 - 1e-12))


class GammaRow(NamedTuple):
    L: int
    V: int
    gamma: float
    lower_bound: float
    bound_holds: bool
    regime: str
    regime_holds: bool


def regime_condition(L: int, V: int) -> bool:
    """L log L <= V log V when L <= V, L log L >= V log V otherwise."""
    lhs, rhs = L * math.log2(L), V * math.log2(V)
    return lhs <= rhs if L <= V else lhs >= rhs


def gamma_grid(max_L: int = 6, max_V: int = 6) -> List[GammaRow]:
    rows = []
    for L in range(2, max_L + 1):
        for V in range(2, max_V + 1):
            g = gamma_ratio(L, V)
            regime = "L<=V" if L <= V else "L>V"
            rows.append(GammaRow(L, V, g.gamma, g.lower_bound, g.bound_holds, regime, regime_condition(L, V)))
    return rows


def partial_comp_bound(L: int, V: int, k_shared: int) -> float:
    """
    Bound for a mapping whose first ``k_shared`` coordinates reuse per-attribute rules.
    The factored part costs like k_bound_comp on k coordinates; the other L-k
    coordinates are spelled out as a permutation inside each of the V^k blocks.
    """
    _check_lv(L, V)
    if not 0 <= k_shared <= L:
        raise InvalidK(f"k_shared must lie in [0, {L}], got {k_shared}")
    factored = 0.0
    if k_shared > 0:
        factored = V * math.log2(V) + k_shared * math.log2(k_shared)
    return factored + V ** L * (L - k_shared) * math.log2(V)
