from __future__ import annotations

import pytest
from conftest import CORPUS, FIXTURES, load_fixture, unit_from_source
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ssrlint.errors import DepthExceeded, NotATransfer
from ssrlint.extract import StakingInfo, extract_heuristic, refine_roles
from ssrlint.graphs import build_callgraph
from ssrlint.ingest import ir
from ssrlint.model import CdgNode, build_cdg, build_model, depends_on_balance, resolve_paths
from ssrlint.paths import Scope, VariablePath
from ssrlint.transfers import find_transfers, locate_transfer_amount

HEAD = """// SPDX-License-Identifier: MIT
pragma solidity ^0.8.0;
interface IERC20 {
    function transfer(address to, uint256 amount) external returns (bool);
    function transferFrom(address from, address to, uint256 amount) external returns (bool);
    function balanceOf(address who) external view returns (uint256);
}
"""


def transfers_of(src: str):
    unit = unit_from_source(HEAD + src)
    c = unit.contracts[-1]
    cg = build_callgraph(unit)
    return c, cg, find_transfers(c, cg)


def cdg_in(src: str, fn: str, **kw):
    c, cg, ts = transfers_of(src)
    t = next(t for t in ts if t.anchor.name == fn)
    return build_cdg(t.amount_expr, c, cg, transfer=t, **kw)


def model_of(path, contract=None):
    unit, cg, c = load_fixture(path, contract)
    info = refine_roles(extract_heuristic(c, cg), cg, c)
    return build_model(c, info, cg)


def labels(nodes) -> set[str]:
    return {n.label for n in nodes}


def dotted(paths) -> set[str]:
    return {p.dotted for p in paths}


# --- path resolution -----------------------------------------------------------------

STRUCT_SRC = HEAD + """
contract S {
    struct UserInfo { uint256 stakeAmount; uint256 since; }
    mapping(address => UserInfo) public userInfo;
    mapping(address => uint256) public userStakeAmount;
}
"""


def test_two_layer_path():
    c = unit_from_source(STRUCT_SRC).contracts[-1]
    info = StakingInfo()
    info.var_roles["UserStakeAmount"] = ["userInfo.stakeAmount"]
    m = resolve_paths(info, c)
    assert m.amounts == {VariablePath("userInfo", "stakeAmount", "address-keyed")}


def test_flat_path():
    c = unit_from_source(STRUCT_SRC).contracts[-1]
    info = StakingInfo()
    info.var_roles["UserStakeAmount"] = ["userStakeAmount"]
    m = resolve_paths(info, c)
    assert m.amounts == {VariablePath("userStakeAmount", None, "address-keyed")}


def test_unknown_name_is_dropped():
    c = unit_from_source(STRUCT_SRC).contracts[-1]
    info = StakingInfo()
    info.var_roles["UserStakeAmount"] = ["stakeAmt"]
    m = resolve_paths(info, c)
    assert m.amounts == set()
    assert any("stakeAmt" in d for d in m.diagnostics)


def test_ambiguous_member_keeps_all_candidates():
    src = HEAD + """
contract A {
    struct P { uint256 amount; }
    struct Q { uint256 amount; }
    mapping(address => P) public ps;
    mapping(uint256 => Q) public qs;
}
"""
    c = unit_from_source(src).contracts[-1]
    info = StakingInfo()
    info.var_roles["UserStakeAmount"] = ["amount"]
    m = resolve_paths(info, c)
    assert dotted(m.amounts) == {"ps.amount", "qs.amount"}
    assert m.ambiguous == m.amounts
    assert m.diagnostics


# --- transfer amount -----------------------------------------------------------------

def test_fig2_amount_is_reward_local():
    m = model_of(CORPUS / "fig2_svm.sol")
    (t,) = m.getreward_funcs["claimReward"]
    assert isinstance(t.amount_expr, ir.Identifier) and t.amount_expr.name == "_reward"


def test_literal_amount_is_constant_root():
    cdg = cdg_in("contract C { IERC20 token; function f(address to) external { token.transfer(to, 100); } }", "f")
    assert cdg.root.kind == "constant" and cdg.root.name == "100"
    assert cdg.edges == [] and cdg.state_dep == set()


def test_native_send_amount():
    c, cg, ts = transfers_of(
        'contract C { function f(address to, uint256 amt) external { (bool ok, ) = payable(to).call{value: amt}(""); require(ok); } }'
    )
    (t,) = ts
    assert t.native
    assert t.amount_expr.name == "amt"


def test_non_transfer_statement_raises():
    c, cg, _ = transfers_of("contract C { uint256 x; function f() external { x = 1; } }")
    f = c.functions_named("f")[0]
    with pytest.raises(NotATransfer):
        locate_transfer_amount(f.body[0], Scope(c, f), c)


# --- CDG construction ----------------------------------------------------------------

def test_fig11_walkthrough():
    m = model_of(FIXTURES / "fig11_cdg.sol")
    (cdg,) = m.cdgs_for("GetReward")
    assert cdg.root.label == "_reward"
    assert labels(cdg.cal_targets()) == {
        "_rewardPerToken", "_totalSupply", "userLPStakeAmount[*]", "userRewardPerTokenPaid[*]", "userRewards[*]",
    }
    assert "min" in labels(cdg.con_targets())
    assert not depends_on_balance(cdg)
    assert not m.DependonBalance("_reward")


def test_transitive_assignment_chain():
    cdg = cdg_in("""
contract C {
    IERC20 token; uint256 a; uint256 b; uint256 c; uint256 d;
    function set(uint256 x, uint256 y) external { b = c + d; c = x; d = y; }
    function f(address to) external { a = b; token.transfer(to, a); }
}""", "f")
    assert dotted(cdg.state_dep) == {"a", "b", "c", "d"}


def test_native_balance_dependency():
    cdg = cdg_in("contract C { function f() external { payable(msg.sender).transfer(address(this).balance / 2); } }", "f")
    assert cdg.depends_on_balance and cdg.balance_kinds == {"native"}


def test_token_balance_dependency():
    cdg = cdg_in("""
contract C {
    IERC20 token;
    function f() external { uint256 r = token.balanceOf(address(this)) / 10; token.transfer(msg.sender, r); }
}""", "f")
    assert cdg.depends_on_balance and cdg.balance_kinds == {"token"}


def test_constant_amount_has_no_balance_dependency():
    cdg = cdg_in("contract C { IERC20 token; function f() external { token.transfer(msg.sender, 5); } }", "f")
    assert not cdg.depends_on_balance


def test_fig3_predicates():
    m = model_of(CORPUS / "fig3_rt.sol")
    assert m.StakeTime("lastClaimTime")
    assert not m.CalDepend("_reward", "lastClaimTime")  # the defect: reward ignores stake time
    fixed = model_of(CORPUS / "fig3_rt_fixed.sol")
    assert fixed.CalDepend("_reward", "lastClaimTime")
    assert fixed.StakeTime("block.timestamp")


def test_caldepend_is_reflexive():
    m = model_of(CORPUS / "fig2_svm.sol")
    assert m.CalDepend("_reward", "_reward")


def test_depth_bound_marks_partial():
    chain = "\n".join(f"    function g{i}(uint256 x) internal view returns (uint256) {{ return g{i + 1}(x) + 1; }}" for i in range(6))
    src = f"""
contract C {{
    IERC20 token; uint256 base;
{chain}
    function g6(uint256 x) internal view returns (uint256) {{ return x + base; }}
    function f() external {{ token.transfer(msg.sender, g0(1)); }}
}}"""
    deep = cdg_in(src, "f")
    assert not deep.partial and dotted(deep.state_dep) == {"base"}
    shallow = cdg_in(src, "f", depth_bound=3)
    assert shallow.partial and shallow.diagnostics
    with pytest.raises(DepthExceeded):
        cdg_in(src, "f", depth_bound=3, strict=True)


def test_recursion_terminates():
    cdg = cdg_in("""
contract C {
    IERC20 token; uint256 s;
    function r(uint256 x) internal view returns (uint256) { if (x == 0) { return s; } return r(x - 1); }
    function f() external { token.transfer(msg.sender, r(3)); }
}""", "f")
    assert "s" in dotted(cdg.state_dep)


# --- properties --------------------------------------------------------------------

N_STATE = 6
N_LOCAL = 4


def _name(i: int) -> str:
    return f"s{i}" if i < N_STATE else f"l{i - N_STATE}"


assignment = st.tuples(
    st.integers(0, N_STATE + N_LOCAL - 1),
    st.lists(st.integers(0, N_STATE + N_LOCAL - 1), min_size=0, max_size=3),
)


def _program(assigns, extra: str = ""):
    """Straight-line body: all locals declared first, then the assignments, then the transfer of l0."""
    decls = "".join(f"uint256 l{i} = 0; " for i in range(N_LOCAL))
    body = []
    for lhs, rhs in assigns:
        expr = " + ".join(_name(r) for r in rhs) or "1"
        body.append(f"{_name(lhs)} = {expr};")
    state = " ".join(f"uint256 s{i};" for i in range(N_STATE))
    return f"""
contract R {{
    IERC20 token; {state}
    function f() external {{ {decls}{' '.join(body)} {extra} token.transfer(msg.sender, l0); }}
}}"""


def _closure(assigns) -> set[str]:
    deps: dict[str, set[str]] = {}
    for lhs, rhs in assigns:
        deps.setdefault(_name(lhs), set()).update(_name(r) for r in rhs)
    seen: set[str] = set()
    todo = ["l0"]
    while todo:
        v = todo.pop()
        for w in deps.get(v, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return {v for v in seen if v.startswith("s")}


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(assignment, min_size=1, max_size=20))
def test_state_dep_matches_naive_closure(assigns):
    cdg = cdg_in(_program(assigns), "f")
    assert dotted(cdg.state_dep) == _closure(assigns)
    # every variable enters the graph once
    assert len(cdg.nodes) == len(set(cdg.nodes))
    assert len(cdg.nodes) <= N_STATE + N_LOCAL + 2


@settings(max_examples=50, deadline=None)
@given(st.lists(assignment, min_size=1, max_size=12), st.integers(0, N_STATE + N_LOCAL - 1))
def test_adding_root_assignment_is_monotone(assigns, v):
    before = cdg_in(_program(assigns), "f")
    after = cdg_in(_program(assigns + [(N_STATE, [N_STATE, v])]), "f")
    assert labels(before.nodes) <= labels(after.nodes)


@settings(max_examples=50, deadline=None)
@given(st.lists(assignment, min_size=1, max_size=12))
def test_state_dep_paths_are_declared(assigns):
    src = _program(assigns)
    c = unit_from_source(HEAD + src).contracts[-1]
    cdg = cdg_in(src, "f")
    declared = {v.name for v in c.state_vars}
    assert {p.base for p in cdg.state_dep} <= declared
    for n in cdg.nodes:
        assert n == cdg.root or cdg.path_to(n), f"{n} unreachable from root"


def test_corpus_state_dep_paths_are_declared():
    for path in sorted(CORPUS.glob("*.sol")):
        unit, cg, c = load_fixture(path)
        info = refine_roles(extract_heuristic(c, cg), cg, c)
        m = build_model(c, info, cg)
        declared = {v.name for v in c.state_vars}
        for cdg in m.cdgs.values():
            assert {p.base for p in cdg.state_dep} <= declared, path.name
            assert isinstance(cdg.root, CdgNode)
