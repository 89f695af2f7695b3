"""Question-specific rubric generation and scoring.

Thin Python surface over the C++ core. JSON-shaped inputs/outputs follow the
same schemas the CLI reads and writes.
"""

import json
import os

try:
    from ._rubrictree import (
        build_world_json,
        cluster_tags,
        implicitness,
        levenshtein_similarity,
        normalize_human_scores,
        normalize_score,
        normalize_tag,
        score_answer_json,
        specificity,
        stem,
        tokenize,
    )
except ImportError:  # compiled module on sys.path during in-tree development
    from _rubrictree import (
        build_world_json,
        cluster_tags,
        implicitness,
        levenshtein_similarity,
        normalize_human_scores,
        normalize_score,
        normalize_tag,
        score_answer_json,
        specificity,
        stem,
        tokenize,
    )

__all__ = [
    "asset_dir",
    "build_world",
    "build_world_json",
    "cluster_tags",
    "implicitness",
    "levenshtein_similarity",
    "load_stopwords",
    "normalize_human_scores",
    "normalize_score",
    "normalize_tag",
    "prompt_dir",
    "score_answer",
    "score_answer_json",
    "specificity",
    "stem",
    "tokenize",
]


def asset_dir():
    """Directory holding the packaged prompt templates and stopword list."""
    packaged = os.path.join(os.path.dirname(__file__), "assets")
    if os.path.isdir(packaged):
        return packaged
    override = os.environ.get("RUBRICTREE_ASSET_DIR")
    if override and os.path.isdir(override):
        return override
    raise FileNotFoundError(
        "no asset directory found; set RUBRICTREE_ASSET_DIR for in-tree use")


def prompt_dir():
    return os.path.join(asset_dir(), "prompts")


def load_stopwords(path=None):
    """The shipped stopword list (or another file in the same format)."""
    path = path or os.path.join(asset_dir(), "stopwords.txt")
    words = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            word = line.strip()
            if word and not word.startswith("#"):
                words.append(word.lower())
    return words


def build_world(question, mock_script, w1=3, w2=4, w3=3, enable_review=True,
                enable_polarity_and_scoring=True, prompts=None):
    """Run the expansion pipeline offline against a scripted mock backend.

    `question` and `mock_script` are plain dicts; returns the tree as a dict.
    """
    tree = build_world_json(
        json.dumps(question), json.dumps(mock_script), prompts or prompt_dir(),
        w1, w2, w3, enable_review, enable_polarity_and_scoring)
    return json.loads(tree)


def score_answer(question, answer, criteria, mock_script, prompts=None):
    """Judge `answer` against `criteria` with a scripted mock judge."""
    report = score_answer_json(
        json.dumps(question), answer, json.dumps(criteria),
        json.dumps(mock_script), prompts or prompt_dir())
    return json.loads(report)
