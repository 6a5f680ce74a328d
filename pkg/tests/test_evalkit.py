import numpy as np
import pytest

from pursuit_lab import evalkit, rl, sim
from pursuit_lab.seeding import substream
from conftest import reduced_4p2e3o


def make_record(terminal, steps=100, ret=1.0, block=0, index=0):
    return evalkit.EpisodeRecord(terminal=terminal, steps=steps, episode_return=ret, seed_block=block, index=index)


def test_metrics_fixture():
    # 3 successes at 100/200/300 steps, 1 collision, 1 timeout
    records = [
        make_record(sim.SUCCESS, 100, 10.0),
        make_record(sim.SUCCESS, 200, 11.0),
        make_record(sim.SUCCESS, 300, 12.0),
        make_record(sim.COLLISION, 40, -10.0),
        make_record(sim.TIMEOUT, 300, 2.0),
    ]
    report = evalkit.compute_metrics(records)
    assert report.suc == 60.0
    assert report.col == 1
    assert report.ast == 200.0
    assert report.rew == pytest.approx(np.mean([10, 11, 12, -10, 2]))


def test_metrics_all_success_and_all_collision():
    records = [make_record(sim.SUCCESS, 50 + i) for i in range(4)]
    report = evalkit.compute_metrics(records)
    assert report.suc == 100.0 and report.col == 0

    records = [make_record(sim.COLLISION, 10) for _ in range(4)]
    report = evalkit.compute_metrics(records)
    assert report.suc == 0.0
    assert report.col == 4
    assert report.ast is None


def test_metrics_partition_property():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        records = [
            make_record(rng.choice([sim.SUCCESS, sim.COLLISION, sim.TIMEOUT]), int(rng.integers(1, 300)))
            for _ in range(n)
        ]
        r = evalkit.compute_metrics(records)
        assert r.suc + r.col_pct + r.timeout_pct == pytest.approx(100.0)


def test_metrics_empty_rejected():
    with pytest.raises(ValueError):
        evalkit.compute_metrics([])


def test_zoo_compositions(tmp_path):
    assets = evalkit.ZooAssets()
    zoo1 = evalkit.build_zoo("zoo1", assets)
    assert zoo1.members == ("greedy",)

    with pytest.raises(ValueError):
        evalkit.build_zoo("zoo2", assets)  # needs two SP checkpoints

    # fabricate two SP checkpoints with recorded SUC
    cfg = rl.PpoConfig()
    env = reduced_4p2e3o()
    paths = []
    for i, suc in enumerate((54.0, 70.0, 60.0)):
        model = rl.init_actor_critic(sim.obs_length(env), sim.obs_length(env), cfg, substream(i, "init"))
        path = tmp_path / f"sp{i}.zip"
        rl.save_policy(path, model, extra={"selfplay_suc": suc})
        paths.append(str(path))
    assets = evalkit.ZooAssets(sp_checkpoints=paths)
    zoo2 = evalkit.build_zoo("zoo2", assets)
    # maximally separated pair: 70 (strong) and 54 (weak)
    assert zoo2.members == (f"ckpt:{paths[1]}", f"ckpt:{paths[0]}")
    zoo3 = evalkit.build_zoo("zoo3", assets)
    assert zoo3.members == ("greedy",) + zoo2.members
    with pytest.raises(ValueError):
        evalkit.build_zoo("zoo9", assets)


def test_resolve_policy_checks_dims(tmp_path):
    env = reduced_4p2e3o()
    cfg = rl.PpoConfig()
    model = rl.init_actor_critic(7, 7, cfg, substream(0, "init"))  # wrong obs dim
    path = tmp_path / "bad.zip"
    rl.save_policy(path, model, extra={})
    with pytest.raises(ValueError):
        evalkit.resolve_policy(f"ckpt:{path}", env)
    with pytest.raises(FileNotFoundError):
        evalkit.resolve_policy("ckpt:/nonexistent/x.zip", env)


def test_run_evaluation_scripted_deterministic():
    env = reduced_4p2e3o(num_ctrl=2, num_unctrl=2, unseen=("greedy",))
    zoo = evalkit.ZooSpec(zoo_id="zoo1", members=("greedy",))
    report1, records1 = evalkit.run_evaluation("greedy", zoo, env, n_episodes=10, seed=5)
    report2, records2 = evalkit.run_evaluation("greedy", zoo, env, n_episodes=10, seed=5)
    assert report1.to_json() == report2.to_json()
    assert [r.terminal for r in records1] == [r.terminal for r in records2]
    assert report1.n_episodes == 10
    # single-episode report equals that episode's literal outcome
    r_single, recs = evalkit.run_evaluation("greedy", zoo, env, n_episodes=1, seed=6, seed_blocks=1)
    assert r_single.n_episodes == 1
    assert r_single.suc == (100.0 if recs[0].terminal == sim.SUCCESS else 0.0)
    assert r_single.rew == pytest.approx(recs[0].episode_return)


def test_run_evaluation_parallel_jobs_identical():
    env = reduced_4p2e3o(num_ctrl=2, num_unctrl=2, unseen=("greedy",))
    zoo = evalkit.ZooSpec(zoo_id="zoo1", members=("greedy",))
    seq, _ = evalkit.run_evaluation("greedy", zoo, env, n_episodes=10, seed=7, jobs=1)
    par, _ = evalkit.run_evaluation("greedy", zoo, env, n_episodes=10, seed=7, jobs=4)
    assert seq.to_json() == par.to_json()


def test_ast_bounded_by_horizon():
    env = reduced_4p2e3o(num_ctrl=2, num_unctrl=2, unseen=("greedy",))
    zoo = evalkit.ZooSpec(zoo_id="zoo1", members=("greedy",))
    report, records = evalkit.run_evaluation("greedy", zoo, env, n_episodes=20, seed=8)
    if report.ast is not None:
        assert report.ast <= env.task.task_horizon
    for rec in records:
        assert rec.steps <= env.task.task_horizon


def test_zoo_sampling_uniformity():
    # selection frequency of each zoo3 member within 2% of uniform over 10k draws
    members = ("greedy", "ckpt:a", "ckpt:b")
    counts = {m: 0 for m in members}
    n = 10_000
    for e in range(n):
        zoo_rng = substream(9, "zoo", 0, e)
        for _slot in range(2):
            counts[members[int(zoo_rng.integers(0, len(members)))]] += 1
    total = sum(counts.values())
    for m in members:
        assert abs(counts[m] / total - 1 / 3) < 0.02


def test_report_serialization(tmp_path):
    records = [make_record(sim.SUCCESS, 100, 10.0, block=b) for b in range(5)]
    report = evalkit.compute_metrics(records, seed=3)
    text = report.to_json()
    assert '"suc": 100.0' in text
    path = tmp_path / "report.csv"
    report.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("suc,col,ast,rew")
    assert len(lines) == 2
