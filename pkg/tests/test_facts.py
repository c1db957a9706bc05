from __future__ import annotations

from conftest import CORPUS, FIXTURES, load_fixture, unit_from_source
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrlint.extract import extract_heuristic, refine_roles
from ssrlint.facts import build_facts, derive_perm_checks, detect_lp_pool
from ssrlint.graphs import build_callgraph
from ssrlint.model import build_model
from ssrlint.paths import CALLER, THIS, AddrClass, VariablePath

HEAD = """// SPDX-License-Identifier: MIT
pragma solidity ^0.8.0;
"""


def facts_of_unit(unit, contract=None):
    cg = build_callgraph(unit)
    c = unit.contracts[-1] if contract is None else unit.contract(contract)
    info = refine_roles(extract_heuristic(c, cg), cg, c)
    return build_facts(c, build_model(c, info, cg), cg, unit)


def facts_of(path):
    unit, cg, c = load_fixture(path)
    return facts_of_unit(unit, c.name)


def facts_src(src: str):
    return facts_of_unit(unit_from_source(HEAD + src))


def perms_src(src: str):
    unit = unit_from_source(HEAD + src)
    c = unit.contracts[-1]
    return derive_perm_checks(c, build_callgraph(unit))


def p(base, member=None, shape="address-keyed"):
    return VariablePath(base, member, shape)


# --- lpPool --------------------------------------------------------------------------

def _iface(body: str, name: str = "I"):
    unit = unit_from_source(HEAD + f"interface {name} {{ {body} }}")
    return unit.contracts[-1]


def test_pair_with_get_reserves_is_pool():
    c = _iface("function getReserves() external view returns (uint112, uint112, uint32);", "IPancakePair")
    assert detect_lp_pool(c)


def test_plain_erc20_is_not_pool():
    c = _iface("function transfer(address to, uint256 v) external returns (bool); "
               "function approve(address s, uint256 v) external returns (bool);", "IERC20")
    assert not detect_lp_pool(c)


def test_empty_interface_is_not_pool():
    assert not detect_lp_pool(_iface("", "IEmpty"))


def test_name_hint_alone_does_not_decide():
    assert not detect_lp_pool(_iface("function transfer(address to, uint256 v) external returns (bool);", "ILPPool"))


def test_mint_burn_with_token_accessors_is_pool():
    c = _iface("function mint(address to) external returns (uint256); function burn(address to) external returns (uint256, uint256); "
               "function token0() external view returns (address); function token1() external view returns (address);")
    assert detect_lp_pool(c)


def test_erc721_interface_is_not_pool():
    c = _iface("function ownerOf(uint256 id) external view returns (address); function mint(address to, uint256 id) external; "
               "function burn(uint256 id) external; function approve(address to, uint256 id) external;", "IERC721")
    assert not detect_lp_pool(c)


def test_fig4_pool_is_recorded():
    fb = facts_of(CORPUS / "fig4_slr.sol")
    assert fb.lp_pools


def test_clean_contracts_have_no_pools():
    for name in ("clean_synthetix.sol", "clean_masterchef.sol", "clean_native.sol"):
        assert not facts_of(CORPUS / name).lp_pools, name


# --- modify / verify -----------------------------------------------------------------

def test_fig2_modify_reward_rate():
    fb = facts_of(CORPUS / "fig2_svm.sol")
    assert ("setRewardRate", VariablePath("rewardRate")) in fb.modify


def test_fig5_unstake_verifies_amount():
    fb = facts_of(CORPUS / "fig5_osu.sol")
    assert fb.verifies("unStake", p("userStakeAmount"))
    assert fb.verify[("unStake", p("userStakeAmount"))] == [35]


def test_fig11_self_keyed_reward_reset():
    fb = facts_of(FIXTURES / "fig11_cdg.sol")
    assert ("getReward", p("userRewards"), 35) in fb.self_keyed_writes


def test_fig7_writes_keyed_by_params():
    fb = facts_of(CORPUS / "fig7_uaa.sol")
    keys = {w.key_class for w in fb.modifies("forceTransfer", p("userStakeAmount"))}
    assert keys == {AddrClass("param", "from"), AddrClass("param", "to")}


def test_two_layer_members_are_distinguished():
    fb = facts_src("""
contract S {
    struct U { uint256 amount; uint256 since; }
    mapping(address => U) public users;
    function touch() external { users[msg.sender].since = block.timestamp; }
    function check() external view { require(users[msg.sender].amount > 0); }
}""")
    assert ("touch", p("users", "since")) in fb.modify
    assert ("touch", p("users", "amount")) not in fb.modify
    assert fb.verifies("check", p("users", "amount"))
    assert not fb.verifies("check", p("users", "since"))


def test_modifier_guards_count_as_verification():
    fb = facts_src("""
contract M {
    mapping(address => uint256) public staked;
    modifier hasStake() { require(staked[msg.sender] > 0); _; }
    function poke() external hasStake { staked[msg.sender] = staked[msg.sender] + 1; }
}""")
    assert fb.verifies("poke", p("staked"))


def test_verify_entries_are_guard_reads():
    for path in sorted(CORPUS.glob("*.sol")):
        fb = facts_of(path)
        for (fn, vp) in fb.verify:
            assert vp in fb.guard_reads.get(fn, set()), (path.name, fn, vp)


# --- transfers -----------------------------------------------------------------------

def test_fig2_reward_trans_is_caller_to_caller():
    fb = facts_of(CORPUS / "fig2_svm.sol")
    claims = [(t.frm, t.to) for t in fb.reward_trans if t.function == "claimReward"]
    assert claims == [(CALLER, CALLER)]


def test_fig7_force_transfer_between_params():
    fb = facts_of(CORPUS / "fig7_uaa.sol")
    moves = {(t.frm, t.to) for t in fb.reward_trans if t.function == "forceTransfer"}
    assert moves == {(AddrClass("param", "from"), AddrClass("param", "to"))}


def test_native_send_fact():
    fb = facts_of(CORPUS / "clean_native.sol")
    assert fb.na_trans
    assert all(t.line > 0 for t in fb.na_trans)


def test_function_without_sends_has_no_transfer_facts():
    fb = facts_src("contract N { uint256 x; function f(uint256 v) external { x = v; } }")
    assert fb.na_trans == [] and fb.reward_trans == []


# --- permission checks ---------------------------------------------------------------

def test_only_owner_modifier():
    fb = perms_src("""
contract O {
    address public owner;
    constructor() { owner = msg.sender; }
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function set() external onlyOwner {}
}""")
    assert fb.perm_checks == {("set", AddrClass("state", "owner"))}


def test_caller_equality_against_param():
    fb = perms_src("""
contract P {
    mapping(address => uint256) bal;
    function move(address from, address to, uint256 v) external {
        require(msg.sender == from);
        bal[from] -= v; bal[to] += v;
    }
}""")
    assert fb.perm_checks == {("move", AddrClass("param", "from"))}


def test_allowance_check():
    fb = perms_src("""
contract A {
    mapping(address => mapping(address => uint256)) public allowance;
    mapping(address => uint256) bal;
    function pull(address from, uint256 v) external {
        require(allowance[from][msg.sender] >= v);
        bal[from] -= v;
    }
}""")
    assert len(fb.perms) == 1
    assert fb.perms[0].who == AddrClass("param", "from") and fb.perms[0].pattern == "allowance"


def test_comparing_two_non_callers_is_not_a_check():
    fb = perms_src("""
contract X {
    address public owner;
    function f(address a) external view { require(a == owner); }
}""")
    assert fb.perms == []


def test_fig7_force_transfer_has_no_check():
    fb = facts_of(CORPUS / "fig7_uaa.sol")
    assert not fb.has_perm("forceTransfer")
    assert facts_of(CORPUS / "fig7_uaa_fixed.sol").has_perm("forceTransfer", AddrClass("param", "from"))


def test_tx_origin_is_advisory():
    fb = perms_src("""
contract T {
    address public owner;
    function f() external view { require(tx.origin == owner); }
}""")
    assert [q.pattern for q in fb.perms] == ["origin"]
    assert fb.advisories


# --- grounding -----------------------------------------------------------------------

GROUND = """
contract G {
    address public owner;
    mapping(address => uint256) public staked;
    constructor() { owner = msg.sender; }
    function a(address who) external {
        require(msg.sender == owner);
        require(staked[who] > 0);
        staked[who] = 0;
    }
}"""
GROUND_LINES = GROUND.strip("\n").splitlines()
# statement line (1-based within GROUND) -> predicate on the fact base that it grounds
GROUNDED = {
    6: lambda fb: fb.has_perm("a"),
    7: lambda fb: fb.verifies("a", p("staked")),
    8: lambda fb: ("a", p("staked")) in fb.modify,
}


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(sorted(GROUNDED)))
def test_deleting_a_statement_removes_its_fact(line):
    full = facts_src(GROUND.strip("\n"))
    assert all(check(full) for check in GROUNDED.values())
    cut = "\n".join(x if i != line else "" for i, x in enumerate(GROUND_LINES, start=1))
    reduced = facts_src(cut)
    assert not GROUNDED[line](reduced)


def test_every_fact_cites_a_line():
    for path in sorted(CORPUS.glob("*.sol")):
        fb = facts_of(path)
        assert all(w.line > 0 for w in fb.writes)
        assert all(lines and min(lines) > 0 for lines in fb.verify.values())
        assert all(t.line > 0 for t in fb.na_trans + fb.reward_trans)
        assert all(q.line > 0 for q in fb.perms)


def test_this_class_is_contract():
    assert str(THIS) == "This"
