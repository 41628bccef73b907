"""Every corpus program behaves as its ``-- expect:`` header says."""

from __future__ import annotations

import pytest

from corpus_util import cases, observe


@pytest.mark.parametrize("case", cases(), ids=lambda c: c.name)
def test_expectation(case):
    assert observe(case) == case.expect


def test_corpus_size():
    assert len(cases()) >= 40
