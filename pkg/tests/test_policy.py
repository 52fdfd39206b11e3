"""Driver synthesis, policy checking, counterexamples and capacity search."""

import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st

from leakbound.errors import DriverSizeError, InsufficientBound, InternalSoundnessError
from leakbound.frontend import load_source
from leakbound.lang.harness import resolve_harness
from leakbound.oracle import oracle_capacity
from leakbound.policy import (
    AnalysisConfig, VerifiedBounded, check_policy, measure_capacity, replay_counterexample,
    synthesize_driver, vacuity_check,
)
from progen import _Gen

MODULO_N1 = """\
void main(void) {
    bool l = input();
    u8 h1 = input();
    s32 o1 = modulo(h1, l);
    u8 h2 = input();
    s32 o2 = modulo(h2, l);
    assert(o2 == o1);
}
"""

MODULO_N2 = """\
void main(void) {
    bool l = input();
    u8 h1 = input();
    s32 o1 = modulo(h1, l);
    u8 h2 = input();
    s32 o2 = modulo(h2, l);
    assume(!(o1 == o2));
    u8 h3 = input();
    s32 o3 = modulo(h3, l);
    assert((o3 == o1 || o3 == o2));
}
"""


def harnessed(text, arch=32):
    prog = load_source(text, arch)
    return prog, resolve_harness(prog)


# -- driver synthesis ------------------------------------------------------------------


@pytest.mark.parametrize("n, text", [(1, MODULO_N1), (2, MODULO_N2)])
def test_driver_text(corpus, n, text):
    driver = synthesize_driver(*corpus("modulo"), n)
    assert driver.text.strip() == text.strip()
    assert driver.name == "main"
    assert driver.prog.entry == "main"


def test_driver_shape_n3(corpus):
    text = synthesize_driver(*corpus("modulo"), 3).text
    assumes = [line.strip() for line in text.splitlines() if "assume" in line]
    assert assumes == ["assume(!(o1 == o2));", "assume(!(o1 == o3));", "assume(!(o2 == o3));"]
    assert text.count("modulo(") == 4
    assert "assert((o4 == o1 || (o4 == o2 || o4 == o3)));" in text


def test_driver_compares_records_bytewise(corpus):
    text = synthesize_driver(*corpus("atalk"), 1).text
    assert "struct sockaddr_at o1 = {0};" in text
    assert "atalk_getname(&o1, l, h1);" in text
    assert "assert(memcmp(&o2, &o1, 16) == 0);" in text


def test_driver_joins_multiple_observables(corpus):
    text = synthesize_driver(*corpus("login"), 1).text
    assert "s32 o1_ret = login_plaintext(l_user, l_pass, &o1_reply, h1);" in text
    assert "assert(((o2_ret == o1_ret) && (o2_reply == o1_reply)));" in text


def test_driver_avoids_name_collisions():
    prog, hs = harnessed("""
#pragma leak high h
#pragma leak low l
#pragma leak observe __return
int h1(int x) { return x; }
int main(u8 h, u8 l) { return h1(h) > l; }
""")
    driver = synthesize_driver(prog, hs, 1)
    assert driver.name == "__driver_main"
    assert "s32 lb_o1 = main(lb_h1, lb_l);" in driver.text
    assert check_policy(prog, hs, 1).status == "Violated"
    assert check_policy(prog, hs, 2).status == "VerifiedComplete"


def test_driver_size_budget(corpus):
    with pytest.raises(DriverSizeError, match="over the budget of 100"):
        synthesize_driver(*corpus("modulo"), 50, size_budget=100)


# -- verdicts --------------------------------------------------------------------------


def test_modulo_verdicts(corpus):
    prog, hs = corpus("modulo")
    statuses = [check_policy(prog, hs, n).status for n in range(1, 7)]
    assert statuses == ["Violated"] * 3 + ["VerifiedComplete"] + ["Vacuous"] * 2
    vac = check_policy(prog, hs, 6).verdict
    assert vac.max_feasible == 4


def test_vacuity_check(corpus):
    prog, hs = corpus("modulo")
    assert vacuity_check(prog, hs, 4) is None
    assert vacuity_check(prog, hs, 1) is None
    assert vacuity_check(prog, hs, 9) == 4
    prog, hs = corpus("password")
    assert vacuity_check(prog, hs, 3) == 2


def test_vacuity_can_be_disabled(corpus):
    prog, hs = corpus("modulo")
    assert check_policy(prog, hs, 6, AnalysisConfig(vacuity=False)).status == "VerifiedComplete"


def test_unwinding_configurations(corpus):
    prog, hs = corpus("loop3")
    with pytest.raises(InsufficientBound) as exc:
        check_policy(prog, hs, 4, AnalysisConfig(k=2))
    assert exc.value.k == 2
    bounded = check_policy(prog, hs, 1, AnalysisConfig(k=2, unwinding_assertions=False))
    assert bounded.verdict == VerifiedBounded(2)
    assert check_policy(prog, hs, 3, AnalysisConfig(k=3)).status == "Violated"


def test_architecture_override(corpus):
    prog, hs = corpus("sigaltstack", 32)
    assert check_policy(prog, hs, 2).status == "Vacuous"
    assert check_policy(prog, hs, 2, AnalysisConfig(arch=64)).status == "Violated"


def test_conflict_budget(corpus):
    from leakbound.errors import BudgetExceeded
    prog, hs = corpus("sigaltstack", 64)
    with pytest.raises(BudgetExceeded):
        check_policy(prog, hs, 4, AnalysisConfig(conflict_budget=0))


@pytest.mark.parametrize("name", ["modulo", "login", "loop3", "password", "getpass_echo"])
def test_verdicts_are_monotone_in_n(corpus, name):
    """Once a policy verifies, every larger policy verifies (or is vacuous)."""
    prog, hs = corpus(name)
    seen_ok = False
    for n in range(1, 7):
        status = check_policy(prog, hs, n).status
        if seen_ok:
            assert status != "Violated"
        seen_ok |= status != "Violated"


# -- counterexamples ---------------------------------------------------------------------


def test_counterexample_content(corpus):
    prog, hs = corpus("login")
    cex = check_policy(prog, hs, 2).counterexample
    assert cex.n == 2
    assert len(cex.high_values) == len(cex.observations) == 3
    assert len(set(cex.observations)) == 3
    replay_counterexample(prog, hs, cex)
    tampered = dataclasses.replace(cex, observations=[cex.observations[0]] * 3)
    with pytest.raises(InternalSoundnessError):
        replay_counterexample(prog, hs, tampered)


def test_counterexample_trace(corpus):
    prog, hs = corpus("modulo")
    cex = check_policy(prog, hs, 3).counterexample
    text = cex.format_trace()
    first = text.split("\n\n")[0].splitlines()
    assert first[0].startswith("State 1 file ") and first[0].endswith(" function main copy 0")
    assert set(first[1]) == {"-"}
    assert first[2].startswith("  main::l=")
    assert "function modulo copy 4" in text
    assert [s.state for s in cex.trace] == list(range(1, len(cex.trace) + 1))


def test_nondeterministic_counterexample_replays(corpus):
    prog, hs = corpus("sigaltstack", 64)
    cex = check_policy(prog, hs, 3).counterexample
    assert all(len(stream) >= 1 for stream in cex.nondet)
    pads = {obs[0][20:] for obs in cex.observations}
    assert len(pads) == 4


# -- capacity -------------------------------------------------------------------------------


def test_capacity_search(corpus):
    report = measure_capacity(*corpus("modulo"))
    assert (report.n_star, report.lower_bound_bits, report.exact) == (4, 2.0, True)
    assert report.probes == [(1, "Violated"), (2, "Violated"), (4, "VerifiedComplete"), (3, "Violated")]
    assert report.summary() == "N*=4, 2.000 bits, exact"


def test_capacity_search_limit(corpus):
    report = measure_capacity(*corpus("modulo"), n_max=2)
    assert (report.n_star, report.exact) == (3, False)
    assert report.summary() == "N*=3, 1.585 bits, lower bound"
    assert "search limit" in report.note


def test_capacity_with_insufficient_bound(corpus):
    report = measure_capacity(*corpus("loop3"), AnalysisConfig(k=2))
    assert not report.exact
    assert report.probes[-1] == (1, "InsufficientBound") or "InsufficientBound" in report.note


# -- driver correctness on small instances ----------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_verdict_matches_exhaustive_enumeration(seed):
    """On 4-bit secrets and 1-bit public inputs the verdict agrees with class counting."""
    gen = _Gen(random.Random(seed), heavy=0.2)
    expr = gen.expr(["h", "l"], 3)
    prog, hs = harnessed(f"""
#pragma leak high h
#pragma leak low l
#pragma leak observe __return
u8 f(u8 h, _Bool l) {{
    h = h & 15;
    return {expr};
}}
""")
    _, classes = oracle_capacity(prog, hs, high_domain=[(h,) for h in range(16)])
    for n in range(1, 5):
        status = check_policy(prog, hs, n).status
        if classes > n:
            assert status == "Violated", (expr, n, classes)
        elif classes == n or n == 1:
            assert status == "VerifiedComplete", (expr, n, classes)
        else:
            assert status == "Vacuous", (expr, n, classes)
