"""The twelve acceptance criteria, each printing one PASS or FAIL line."""

import pytest

from cavitylab.acceptance import CRITERIA


@pytest.mark.parametrize("num,name,check", CRITERIA, ids=[f"{n:02d}-{name.replace(' ', '_')}" for n, name, _ in CRITERIA])
def test_criterion(num, name, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {num:2d} {name}: {detail}")
    assert ok, detail
