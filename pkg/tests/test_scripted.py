import math

import numpy as np
import pytest

from pursuit_lab import scripted, sim
from pursuit_lab.config import Obstacle
from conftest import open_arena


def make_view(x=1.8, y=2.5, heading=0.0, targets=(), drones=(), obstacles=(),
              boundary=(3.6, 5.0), reception=2.0, fps=10.0):
    return scripted.AgentView(
        x=x,
        y=y,
        heading=heading,
        targets=tuple(targets),
        other_drones=tuple(drones),
        obstacles=tuple(obstacles),
        boundary=boundary,
        reception_range=reception,
        omega_max=sim.OMEGA_MAX,
        dt=1.0 / fps,
    )


def test_greedy_aligned_target_zero_steer():
    view = make_view(heading=0.0, targets=[(2.8, 2.5)])
    assert scripted.greedy_action(view) == 0.0


def test_greedy_target_behind_saturates():
    view = make_view(heading=0.0, targets=[(0.8, 2.5)])
    assert scripted.greedy_action(view) == 1.0


def test_greedy_no_target_heads_to_center():
    view = make_view(x=0.5, y=0.5, heading=0.0, targets=())
    expected = scripted.steer_towards(view, 1.8 - 0.5, 2.5 - 0.5)
    assert scripted.greedy_action(view) == expected


def test_greedy_deflects_from_threat():
    clear = make_view(heading=0.0, targets=[(2.8, 2.5)])
    threatened = make_view(heading=0.0, targets=[(2.8, 2.5)], drones=[(2.0, 2.4)])
    assert scripted.greedy_action(clear) == 0.0
    assert scripted.greedy_action(threatened) != 0.0
    # deflection pushes away from the threat on the left side -> steer left (positive)
    assert scripted.greedy_action(threatened) > 0.0


def test_vicsek_equals_greedy_without_threats():
    for heading in (-2.0, 0.0, 1.3):
        view = make_view(heading=heading, targets=[(2.9, 3.4)])
        assert scripted.vicsek_action(view) == scripted.greedy_action(view)


def test_vicsek_zero_repulsion_at_range_boundary():
    base = make_view(heading=0.0, targets=[(3.4, 2.5)])
    at_range = make_view(
        heading=0.0,
        targets=[(3.4, 2.5)],
        drones=[(1.8, 2.5 + scripted.VICSEK_AGENT_RANGE)],
    )
    just_inside = make_view(
        heading=0.0,
        targets=[(3.4, 2.5)],
        drones=[(1.8, 2.5 + scripted.VICSEK_AGENT_RANGE - 1e-6)],
    )
    assert scripted.vicsek_action(at_range) == scripted.vicsek_action(base)
    # contribution is continuous: epsilon inside the range changes steer only slightly
    assert abs(scripted.vicsek_action(just_inside) - scripted.vicsek_action(base)) < 1e-4


def test_vicsek_symmetric_threats_cancel():
    view = make_view(
        heading=0.0,
        targets=[(2.8, 2.5)],
        drones=[(1.8, 2.8), (1.8, 2.2)],  # same distance left and right
    )
    assert scripted.vicsek_action(view) == pytest.approx(0.0, abs=1e-12)


def test_evader_flees_single_pursuer():
    # pursuer due south -> desired heading due north
    view = make_view(heading=math.pi / 2, drones=[(1.8, 1.5)])
    assert scripted.evader_action(view) == pytest.approx(0.0, abs=1e-12)
    view_east = make_view(heading=0.0, drones=[(1.8, 1.5)])
    expected = scripted.steer_towards(view_east, 0.0, 1.0)
    assert scripted.evader_action(view_east) == pytest.approx(expected)


def test_evader_idle_when_nothing_in_range():
    view = make_view(x=1.8, y=2.5, heading=1.0, drones=[(1.8, 2.5 + 2.1)])
    assert scripted.evader_action(view) == 0.0


def test_evader_cornered_moves_along_open_diagonal():
    # bottom-left corner with a pursuer closing in from the diagonal interior:
    # wall fields push up/right, pursuer pushes down/left; walls are closer and win.
    view = make_view(x=0.15, y=0.15, heading=0.0, drones=[(0.7, 0.7)])
    fx = fy = 0.0
    # reproduce the expected field direction by symmetry: it must point into
    # the first quadrant diagonal (up-right), i.e. desired heading ~ pi/4.
    steer = scripted.evader_action(view)
    err = steer * view.omega_max * view.dt  # unclamped would be the full error
    # saturated steer is fine; just require turning toward +pi/4 side
    assert steer > 0.0


def test_outputs_always_clamped():
    rng = np.random.default_rng(0)
    obstacles = (Obstacle(shape="circle", center=(1.8, 2.5), radius=0.3),)
    for _ in range(300):
        view = make_view(
            x=rng.uniform(0, 3.6),
            y=rng.uniform(0, 5),
            heading=rng.uniform(-math.pi, math.pi),
            targets=[(rng.uniform(0, 3.6), rng.uniform(0, 5))],
            drones=[(rng.uniform(0, 3.6), rng.uniform(0, 5))],
            obstacles=obstacles,
        )
        for fn in (scripted.greedy_action, scripted.vicsek_action, scripted.evader_action):
            assert -1.0 <= fn(view) <= 1.0


def test_policies_are_pure():
    view = make_view(heading=0.3, targets=[(2.8, 3.0)], drones=[(2.0, 2.2)])
    for fn in (scripted.greedy_action, scripted.vicsek_action, scripted.evader_action):
        assert fn(view) == fn(view)


def test_pursuer_policy_registry():
    assert scripted.pursuer_policy("greedy") is scripted.greedy_action
    assert scripted.pursuer_policy("vicsek") is scripted.vicsek_action
    with pytest.raises(KeyError):
        scripted.pursuer_policy("teleport")


def test_greedy_captures_static_evader_closed_loop():
    # Open arena, effectively static evader, single greedy pursuer: the
    # closed-loop system must reach a capture well before the horizon.
    cfg = open_arena(num_p=1, num_e=1, velocity_e=1e-6, horizon=1000)
    state, _ = sim.reset(cfg, seed=4)
    while state.terminal == sim.RUNNING:
        action = scripted.greedy_action(sim.pursuer_view(state, 0))
        sim.step(state, [action])
    assert state.terminal == sim.SUCCESS
    assert state.step < 1000
