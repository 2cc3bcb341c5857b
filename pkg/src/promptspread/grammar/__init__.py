"""Grammar of semantically equivalent prompt formats."""
from .constants import ConstantSets, apply_casing, item_label, number_item, wrap_item
from .nodes import (
    ANSWER, UNBOUND, Const, DescriptorOnly, Enumeration, Field, Format, Join, TextOnly,
    descriptor, enumeration, field, formats_equivalent, join, make_format, render_format, text,
    walk,
)
from .restrictions import Violation, is_valid, validate_restrictions
from .serialize import dumps_format, format_from_dict, format_to_dict, load_format
from .space import (
    SampleResult, atomic_neighbors, candidates, changed_groups, draw_formats, enumerate_space,
    sample_equivalent, space_size,
)

__all__ = [
    "ANSWER", "UNBOUND", "Const", "ConstantSets", "DescriptorOnly", "Enumeration", "Field",
    "Format", "Join", "SampleResult", "TextOnly", "Violation", "apply_casing", "atomic_neighbors",
    "candidates", "changed_groups", "descriptor", "draw_formats", "dumps_format", "enumerate_space",
    "enumeration", "field", "format_from_dict", "format_to_dict", "formats_equivalent", "is_valid",
    "item_label", "join", "load_format", "make_format", "number_item", "render_format",
    "sample_equivalent", "space_size", "text", "validate_restrictions", "walk", "wrap_item",
]
