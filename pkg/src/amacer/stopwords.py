"""Fixed English stopword list used by candidate span filtering.

The list is versioned: changing it changes which spans survive
filtering, so any edit must bump ``STOPWORD_LIST_VERSION``.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["STOPWORDS", "STOPWORD_LIST_VERSION", "load_stopwords"]

STOPWORD_LIST_VERSION = "1"

STOPWORDS: frozenset[str] = frozenset(
    {
        "a", "about", "above", "after", "again", "all", "also", "an", "and",
        "any", "are", "as", "at", "be", "because", "been", "before", "being",
        "below", "between", "both", "but", "by", "can", "could", "did", "do",
        "does", "doing", "down", "during", "each", "few", "for", "from",
        "further", "had", "has", "have", "having", "he", "her", "here",
        "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it",
        "its", "itself", "just", "me", "more", "most", "my", "no", "nor",
        "not", "now", "of", "off", "on", "once", "only", "or", "other",
        "our", "out", "over", "own", "per", "same", "she", "so", "some",
        "such", "than", "that", "the", "their", "them", "then", "there",
        "these", "they", "this", "those", "through", "to", "too", "under",
        "until", "up", "very", "was", "we", "were", "what", "when", "where",
        "which", "while", "who", "whom", "why", "will", "with", "would",
        "you", "your", "yours",
    }
)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Reads a custom stopword list, one lowercase word per line.

    Blank lines and ``#`` comments are ignored.
    """
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().lower()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)
