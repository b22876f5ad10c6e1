"""Rule-based fragment extraction over annotated sentences."""

from .annotation import (AnnotationError, Annotator, FileAnnotator, SentenceAnnotation, annotate,
                         dump_annotations, load_annotations, make_annotation)
from .extract import Fragment, extract_fragments, parse_number
from .grammar import Rule, RuleError, RuleSet, compile_rules, rule_problems, serialize_rules
from .kb import KBError, KnowledgeBase, Unit, load_kb

__all__ = [
    "AnnotationError", "Annotator", "FileAnnotator", "SentenceAnnotation", "annotate",
    "dump_annotations", "load_annotations", "make_annotation", "Fragment", "extract_fragments",
    "parse_number", "Rule", "RuleError", "RuleSet", "compile_rules", "rule_problems",
    "serialize_rules", "KBError", "KnowledgeBase", "Unit", "load_kb",
]
