from __future__ import annotations

import json

from conftest import CORPUS, FIXTURES, unit_from_source
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrlint.detect import DEFECTS, replay
from ssrlint.graphs import build_callgraph
from ssrlint.ingest import load_path
from ssrlint.pipeline import RunConfig, analyze, analyze_contract, concrete_contracts
from ssrlint.report import render_json

HEAD = """// SPDX-License-Identifier: MIT
pragma solidity ^0.8.0;
interface IERC20 {
    function transfer(address to, uint256 amount) external returns (bool);
    function transferFrom(address from, address to, uint256 amount) external returns (bool);
    function balanceOf(address who) external view returns (uint256);
}
"""


def run_unit(unit, rules=None):
    cg = build_callgraph(unit)
    cfg = RunConfig(inputs=[], rules=set(rules or DEFECTS))
    return [analyze_contract(unit, c, cg, cfg, []) for c in concrete_contracts(unit)]


def results_src(src: str, rules=None):
    return run_unit(unit_from_source(HEAD + src), rules)


def findings_src(src: str, rules=None):
    return [f for r in results_src(src, rules) for f in r.findings]


def findings_file(path, rules=None):
    return [f for r in run_unit(load_path(path), rules) for f in r.findings]


def kinds(findings) -> list[tuple[str, str, str]]:
    return [(f.defect, f.rule_id, f.function) for f in findings]


# --- figure fixtures -----------------------------------------------------------------

FIGURES = {
    "fig2_svm.sol": ("SVM", "R1", "setRewardRate"),
    "fig3_rt.sol": ("RT", "R3", "claimReward"),
    "fig4_slr.sol": ("SLR", "R4", "claimReward"),
    "fig5_osu.sol": ("OSU", "R5", "unStake"),
    "fig6_uv.sol": ("UV", "R6-C", "claimReward"),
    "fig7_uaa.sol": ("UAA", "R7", "forceTransfer"),
}


def test_each_figure_has_exactly_its_defect():
    for name, expected in FIGURES.items():
        assert kinds(findings_file(CORPUS / name)) == [expected], name


def test_each_minimal_fix_removes_the_finding():
    for name in FIGURES:
        fixed = CORPUS / name.replace(".sol", "_fixed.sol")
        assert findings_file(fixed) == [], fixed.name


def test_fig2_variable_and_evidence():
    (f,) = findings_file(CORPUS / "fig2_svm.sol")
    assert f.variables == ["rewardRate"]
    assert f.confidence == "high"
    assert f.evidence


def test_fig6_status_scenario_is_low_confidence():
    (f,) = findings_file(CORPUS / "fig6_uv.sol")
    assert f.confidence == "low"


def test_fig11_reward_reset_is_not_omission():
    fs = findings_file(FIXTURES / "fig11_cdg.sol")
    assert not [f for f in fs if f.defect == "OSU"]


# --- per-rule fixtures ---------------------------------------------------------------

NATIVE = """
contract NativePool {
    mapping(address => uint256) public userStakeAmount;
    mapping(address => uint256) public lastClaimTime;
    uint256 public totalStaked;

    function stake() external payable {
        userStakeAmount[msg.sender] += msg.value;
        totalStaked += msg.value;
        lastClaimTime[msg.sender] = block.timestamp;
    }

    function claimReward() external {
        require(userStakeAmount[msg.sender] > 0);
        uint256 share = (address(this).balance - totalStaked) * userStakeAmount[msg.sender] / totalStaked;
        uint256 reward = share * (block.timestamp - lastClaimTime[msg.sender]) / 1 days;
        require(reward > 0);
        lastClaimTime[msg.sender] = block.timestamp;
        payable(msg.sender).transfer(reward);
    }

    function unStake(uint256 amount) external {
        require(userStakeAmount[msg.sender] >= amount);
        userStakeAmount[msg.sender] -= amount;
        totalStaked -= amount;
        payable(msg.sender).transfer(amount);
    }
%s
}"""

SWEEP = """
    function sweep(address to) external {
        payable(to).transfer(address(this).balance - totalStaked);
    }"""

GUARDED_SWEEP = """
    address public owner;
    constructor() { owner = msg.sender; }
    function sweep(address to) external {
        require(msg.sender == owner);
        payable(to).transfer(address(this).balance - totalStaked);
    }"""


def test_open_native_sweep_is_r2():
    fs = findings_src(NATIVE % SWEEP)
    assert ("SVM", "R2", "sweep") in kinds(fs)


def test_guarded_native_sweep_is_clean():
    assert findings_src(NATIVE % GUARDED_SWEEP) == []


def test_native_pool_without_sweep_is_clean():
    assert findings_src(NATIVE % "") == []


RT_BASE = """
contract Gate {
    IERC20 public token;
    mapping(address => uint256) public stakeAmount;
    mapping(address => uint256) public lastClaim;
    uint256 public rate = 10;

    function stake(uint256 amount) external {
        stakeAmount[msg.sender] += amount;
        lastClaim[msg.sender] = block.timestamp;
        token.transferFrom(msg.sender, address(this), amount);
    }

    function claim() external {
        %s
        uint256 _reward = stakeAmount[msg.sender] * rate;
        lastClaim[msg.sender] = block.timestamp;
        token.transfer(msg.sender, _reward);
    }
}"""


def test_reward_without_time_is_rt():
    fs = findings_src(RT_BASE % "require(stakeAmount[msg.sender] > 0);")
    assert ("RT", "R3", "claim") in kinds(fs)


def test_time_gated_reward_is_not_rt():
    fs = findings_src(RT_BASE % "require(block.timestamp > lastClaim[msg.sender] + 1 days);")
    assert "RT" not in {f.defect for f in fs}


SLR_TWO = """
interface IPair { function getReserves() external view returns (uint112, uint112, uint32); }
contract TwoPool {
    IERC20 public token;
    IPair public pairA;
    IPair public pairB;
    mapping(address => uint256) public stakeAmount;
    mapping(address => uint256) public lastClaim;

    function stake(uint256 amount) external {
        stakeAmount[msg.sender] += amount;
        lastClaim[msg.sender] = block.timestamp;
        token.transferFrom(msg.sender, address(this), amount);
    }

    function price() internal view returns (uint256) {
        (uint112 a0, uint112 a1, ) = pairA.getReserves();
        %s
    }

    function claim() external {
        require(stakeAmount[msg.sender] > 0);
        uint256 _reward = stakeAmount[msg.sender] * (block.timestamp - lastClaim[msg.sender]) * price() / 1e18;
        lastClaim[msg.sender] = block.timestamp;
        token.transfer(msg.sender, _reward);
    }
}"""


def test_single_pool_price_is_slr():
    fs = findings_src(SLR_TWO % "return uint256(a1) * 1e18 / uint256(a0);")
    assert ("SLR", "R4", "claim") in kinds(fs)


def test_two_pool_average_is_not_slr():
    body = ("(uint112 b0, uint112 b1, ) = pairB.getReserves();\n"
            "        return (uint256(a1) * 1e18 / uint256(a0) + uint256(b1) * 1e18 / uint256(b0)) / 2;")
    fs = findings_src(SLR_TWO % body)
    assert "SLR" not in {f.defect for f in fs}


def test_no_pool_is_not_slr():
    fs = findings_src(SLR_TWO.replace("* price()", "* 3") % "return uint256(a1) * 1e18 / uint256(a0);")
    assert "SLR" not in {f.defect for f in fs}


CLAIM_BASE = """
contract Claims {
    IERC20 public token;
    address public owner;
    mapping(address => uint256) public stakeAmount;
    mapping(address => uint256) public lastClaim;
    mapping(address => uint256) public userRewards;
    constructor() { owner = msg.sender; }

    function stake(uint256 amount) external {
        userRewards[msg.sender] += stakeAmount[msg.sender] * (block.timestamp - lastClaim[msg.sender]);
        stakeAmount[msg.sender] += amount;
        lastClaim[msg.sender] = block.timestamp;
        token.transferFrom(msg.sender, address(this), amount);
    }

    function getReward() external {
        uint256 _reward = userRewards[msg.sender] + stakeAmount[msg.sender] * (block.timestamp - lastClaim[msg.sender]);
        %s
        userRewards[msg.sender] = 0;
        lastClaim[msg.sender] = block.timestamp;
        token.transfer(msg.sender, _reward);
    }
%s
}"""


def test_guard_stripped_claim_is_uv_b():
    fs = findings_src(CLAIM_BASE % ("", ""))
    assert ("UV", "R6-B", "getReward") in kinds(fs)


def test_guarded_claim_is_clean():
    assert findings_src(CLAIM_BASE % ("require(userRewards[msg.sender] > 0);", "")) == []


SET_REWARD = """
    function setUserReward(address user, uint256 u) external {
        userRewards[user] = u;
    }"""


def test_open_reward_setter_is_r8():
    fs = findings_src(CLAIM_BASE % ("require(userRewards[msg.sender] > 0);", SET_REWARD))
    assert ("UAA", "R8", "setUserReward") in kinds(fs)


def test_owner_only_reward_setter_is_clean():
    guarded = SET_REWARD.replace("{\n        userRewards", "{\n        require(msg.sender == owner);\n        userRewards")
    fs = findings_src(CLAIM_BASE % ("require(userRewards[msg.sender] > 0);", guarded))
    assert "UAA" not in {f.defect for f in fs}


ALIAS = """
contract Alias {
    struct U { uint256 amount; uint256 since; }
    IERC20 public token;
    mapping(address => U) public users;

    function stake(uint256 amount) external {
        U storage u = users[msg.sender];
        u.amount += amount;
        u.since = block.timestamp;
        token.transferFrom(msg.sender, address(this), amount);
    }

    function withdraw(uint256 amount) external {
        U storage u = users[msg.sender];
        require(u.amount >= amount);
        %s
        token.transfer(msg.sender, amount);
    }
}"""


def test_update_through_storage_alias_counts():
    assert "OSU" not in {f.defect for f in findings_src(ALIAS % "u.amount -= amount;")}


def test_missing_update_through_storage_alias_is_osu():
    assert ("OSU", "R5", "withdraw") in kinds(findings_src(ALIAS % ""))


def test_wrapper_roles_are_checked_at_the_entry():
    fs = findings_file(FIXTURES / "wrapper.sol")
    assert {f.function for f in fs} <= {"stake", "harvest", "exit"}


def test_non_staking_contract_has_note():
    (r,) = run_unit(load_path(FIXTURES / "erc20_only.sol"))
    assert r.status == "non-staking" and r.findings == []
    assert any(n.startswith("non-staking") for n in r.notes)


# --- whole-run properties ------------------------------------------------------------

def _corpus_report(rules=None):
    return analyze(RunConfig(inputs=[str(CORPUS)], rules=set(rules or DEFECTS), jobs=2))


def test_batch_is_deterministic():
    a = render_json(_corpus_report())
    b = render_json(_corpus_report())
    assert a == b


def test_every_finding_replays():
    report = _corpus_report()
    extra = results_src(NATIVE % SWEEP) + results_src(CLAIM_BASE % ("", SET_REWARD))
    results = [r for r in report.results if r.findings] + extra
    assert results
    for r in results:
        for f in r.findings:
            assert replay(f, r.model, r.facts), f


def test_replay_rejects_tampered_binding():
    report = _corpus_report()
    r = next(r for r in report.results if r.findings and r.findings[0].rule_id == "R1")
    f = r.findings[0]
    f.binding = {**f.binding, "func": "stake"}
    assert not replay(f, r.model, r.facts)


@settings(max_examples=12, deadline=None)
@given(st.sets(st.sampled_from(DEFECTS), min_size=1))
def test_rule_subsets_do_not_cross_talk(rules):
    full = _corpus_report()
    part = _corpus_report(rules)
    assert {f.defect for f in part.findings} <= rules
    expected = [json.dumps(f.to_json()) for f in full.findings if f.defect in rules]
    assert [json.dumps(f.to_json()) for f in part.findings] == expected


def test_uaa_never_cites_self_keyed_write():
    report = _corpus_report()
    extra = results_src(CLAIM_BASE % ("", SET_REWARD))
    for r in [*report.results, *extra]:
        if r.facts is None:
            continue
        self_keyed = {(fn, w_line) for fn, _, w_line in r.facts.self_keyed_writes}
        for f in r.findings:
            if f.defect == "UAA":
                assert (f.function, f.line) not in self_keyed


def test_findings_are_ordered():
    fs = _corpus_report().findings
    assert fs == sorted(fs, key=lambda f: f.sort_key)
