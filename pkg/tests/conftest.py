"""Shared builders for corpus objects used across the test suite."""

from __future__ import annotations

from amacer.corpus import KIND_BULLET, KIND_TITLE, Product, TokenSequence


def make_seq(pid: str, kind: str, index: int, tokens, pos) -> TokenSequence:
    return TokenSequence(product_id=pid, kind=kind, index=index, tokens=tuple(tokens), pos=tuple(pos))


def make_product(pid: str, title_tokens, title_pos, bullets=(), category="cat") -> Product:
    title = make_seq(pid, KIND_TITLE, 0, title_tokens, title_pos)
    bullet_seqs = tuple(
        make_seq(pid, KIND_BULLET, i, toks, pos) for i, (toks, pos) in enumerate(bullets)
    )
    return Product(product_id=pid, category=category, title=title, bullets=bullet_seqs)
