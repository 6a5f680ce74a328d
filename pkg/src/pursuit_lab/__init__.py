"""pursuit_lab: adaptive-teaming multi-drone pursuit in 2D.

Simulator, scripted drones, PPO-family trainers (self-play, PBT, MAPPO,
hypergraph population training, teammate modeling), unseen-teammate zoos,
and a standardized evaluation harness.
"""

__version__ = "0.1.0"
