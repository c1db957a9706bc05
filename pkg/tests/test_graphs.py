from __future__ import annotations

from conftest import CORPUS, FIXTURES, load_fixture, unit_from_source
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrlint.graphs import build_callgraph, build_cfg, cfg_to_dot
from ssrlint.ingest import ir
from ssrlint.paths import CALLER, AddrClass, VariablePath

HEADER = "pragma solidity ^0.8.0;\n"


def _fn(unit, name):
    return next(f for c in unit.contracts for f in c.functions if f.name == name)


def test_empty_body_cfg():
    unit = unit_from_source(HEADER + "contract A { function g() public {} }")
    cfg = build_cfg(unit.contracts[0].functions[0], unit.contracts[0])
    assert cfg.guards == []
    assert [(e.src, e.dst) for e in cfg.edges] == [(cfg.entry, cfg.exit)]


def test_if_else_is_a_diamond():
    unit = unit_from_source(HEADER + "contract A { uint a; function f(bool c) public { if (c) { a = 1; } else { a = 2; } } }")
    c = unit.contracts[0]
    cfg = build_cfg(c.functions[0], c)
    assert len(cfg.blocks) == 4
    assert len(cfg.guards) == 1
    g = cfg.guards[0]
    assigns = {s.sid for s in cfg.stmts if isinstance(s, ir.Assign)}
    assert g.origin == "if" and g.dominated_stmts == assigns


def test_fig11_require_dominates_transfer():
    unit, cg, c = load_fixture(FIXTURES / "fig11_cdg.sol")
    f = _fn(unit, "getReward")
    cfg = cg.cfgs[f]
    requires = [g for g in cfg.guards if g.origin == "require"]
    assert len(requires) == 1
    transfer = next(s for s in cfg.stmts if s.loc.line == 37)
    assert transfer.sid in requires[0].dominated_stmts


def test_modifier_condition_is_entry_guard():
    unit, cg, c = load_fixture(CORPUS / "fig2_svm_fixed.sol")
    f = _fn(unit, "setRewardRate")
    guards = cg.cfgs[f].guards
    assert guards[0].origin == "modifier"
    write = next(s for s in cg.cfgs[f].stmts if s.loc.line == 47)
    assert write.sid in guards[0].dominated_stmts


def test_fig7_force_transfer_writes():
    unit, cg, c = load_fixture(CORPUS / "fig7_uaa.sol")
    du = cg.defuse[_fn(unit, "forceTransfer")]
    assert {p.base for p in du.state_writes} == {"userStakeAmount"}
    keys = {ws.key_class for ws in du.write_sites if ws.path.base == "userStakeAmount"}
    assert keys == {AddrClass("param", "from"), AddrClass("param", "to")}


def test_pure_function_touches_no_state():
    unit = unit_from_source(HEADER + "contract A { uint s; function f(uint x) public pure returns (uint) { return x + 1; } }")
    cg = build_callgraph(unit)
    du = cg.defuse[unit.contracts[0].functions[0]]
    assert du.state_reads == set() and du.state_writes == set()


def test_storage_pointer_alias_write():
    unit = unit_from_source(HEADER + """
contract A {
    struct UserInfo { uint256 amount; uint256 debt; }
    mapping(address => UserInfo) userInfo;
    function f() public {
        UserInfo storage u = userInfo[msg.sender];
        u.amount = 0;
    }
}""")
    cg = build_callgraph(unit)
    du = cg.defuse[unit.contracts[0].functions[0]]
    sites = [ws for ws in du.write_sites if ws.path.member == "amount"]
    assert len(sites) == 1
    assert sites[0].path == VariablePath("userInfo", "amount", "address-keyed")
    assert sites[0].key_class == CALLER


def test_compound_assignment_is_def_and_use():
    unit = unit_from_source(HEADER + "contract A { uint s; function f(uint x) public { s += x; } }")
    cg = build_callgraph(unit)
    du = cg.defuse[unit.contracts[0].functions[0]]
    assert ("state", "s") in du.defined_vars()
    assert ("state", "s") in du.used_vars()


def test_private_helper_reachable_through_public_caller():
    unit = unit_from_source(HEADER + """
contract A {
    uint s;
    function stake() public { _mint(1); }
    function _mint(uint x) private { s = x; }
    function _unused() internal { s = 0; }
}""")
    cg = build_callgraph(unit)
    names = {f.name for f in cg.ext_reachable}
    assert "_mint" in names
    assert "_unused" not in names


def test_fig4_external_call_target_type():
    unit, cg, c = load_fixture(CORPUS / "fig4_slr.sol")
    edges = [e for e in cg.edges if e.kind == "external" and e.callee_name == "getReserves"]
    assert edges
    assert {e.target_type for e in edges} == {"IPancakePair"}


def test_low_level_call_edge():
    unit = unit_from_source(HEADER + "contract A { function f(address t) public { t.call(\"\"); } }")
    cg = build_callgraph(unit)
    assert [e.kind for e in cg.edges] == ["low-level"]


def test_dot_dump_mentions_lines():
    unit, cg, c = load_fixture(CORPUS / "fig2_svm.sol")
    dot = cfg_to_dot(cg.cfgs[_fn(unit, "setRewardRate")])
    assert dot.startswith("digraph") and ":47" in dot


# --- properties ----------------------------------------------------------------------

def _stmts(depth: int):
    leaf = st.one_of(
        st.integers(0, 9).map(lambda k: f"a = x + {k};"),
        st.integers(0, 9).map(lambda k: f"require(x > {k});"),
        st.integers(0, 9).map(lambda k: f"b = a * {k};"),
    )
    if depth == 0:
        return st.lists(leaf, min_size=1, max_size=3)
    inner = _stmts(depth - 1)
    compound = st.one_of(
        st.tuples(st.integers(0, 9), inner, inner).map(lambda t: f"if (x > {t[0]}) {{ {' '.join(t[1])} }} else {{ {' '.join(t[2])} }}"),
        st.tuples(st.integers(0, 9), inner).map(lambda t: f"if (a < {t[0]}) {{ {' '.join(t[1])} }}"),
        st.tuples(st.integers(0, 9), inner).map(lambda t: f"if (b == {t[0]}) {{ {' '.join(t[1])} return; }}"),
        st.tuples(st.integers(0, 9), inner).map(lambda t: f"while (a < {t[0]}) {{ {' '.join(t[1])} }}"),
    )
    return st.lists(st.one_of(leaf, compound), min_size=1, max_size=4)


@settings(max_examples=40, deadline=None)
@given(_stmts(2))
def test_guard_domination_is_control_dependence(body):
    src = HEADER + "contract A { uint a; uint b; function f(uint x) public { " + " ".join(body) + " } }"
    unit = unit_from_source(src)
    c = unit.contracts[0]
    cfg = build_cfg(c.functions[0], c)
    live = cfg.reachable()
    for g in cfg.guards:
        out_edges = cfg.successors(g.block)
        if g.origin == "loop":
            # the exit edge of a loop is always eventually taken
            out_edges = [e for e in out_edges if e.kind == "true"]
        for s in cfg.stmts:
            b = cfg.stmt_block.get(s.sid)
            if b is None or b not in live or b == g.block:
                continue
            cut = any(b not in cfg.reachable(skip=e) for e in out_edges)
            assert (s.sid in g.dominated_stmts) == cut, (src, g.origin, s.loc)


NAMES = ["p", "q", "r", "u", "v", "w"]


@settings(max_examples=40, deadline=None)
@given(st.permutations(NAMES).map(lambda xs: xs[:3]))
def test_straight_line_defuse(names):
    a, b, c = names
    src = HEADER + f"contract A {{ function f(uint {b}, uint {c}) public pure {{ uint {a} = {b} + {c}; }} }}"
    unit = unit_from_source(src)
    cg = build_callgraph(unit)
    du = cg.defuse[unit.contracts[0].functions[0]]
    assert {k[-1] for k in du.defined_vars()} == {a}
    assert {k[-1] for k in du.used_vars()} == {b, c}


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.booleans(), min_size=3, max_size=6),
    st.data(),
)
def test_ext_reachable_grows_with_edges(public_flags, data):
    n = len(public_flags)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    edges = data.draw(st.lists(st.sampled_from(pairs), max_size=8, unique=True))
    extra = data.draw(st.sampled_from(pairs))

    def build(es):
        fns = []
        for i, pub in enumerate(public_flags):
            calls = " ".join(f"f{j}();" for (k, j) in es if k == i)
            vis = "public" if pub else "internal"
            fns.append(f"function f{i}() {vis} {{ {calls} }}")
        unit = unit_from_source(HEADER + "contract A { " + " ".join(fns) + " }")
        return {f.name for f in build_callgraph(unit).ext_reachable}

    before = build(edges)
    after = build(sorted(set(edges) | {extra}))
    assert before <= after
