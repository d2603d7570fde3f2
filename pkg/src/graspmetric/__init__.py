"""Arm-aware grasp selection for two-step tabletop tasks.

The ``m_ag`` ordering ranks candidate grasps by how comfortably the arm can
reach them (the number of collision-free IK solutions, ``m_a``) and, inside
each comfort bin, by how close the approach line passes to the centre of
mass (``m_g``).  Rankings can be taken at the start pose, at a guessed goal
pose, or as an average of both.
"""

from .fixtures import FixtureError, Fixtures, load_fixtures, parse_fixtures
from .grasping import Grasp, generate_grasps, grasp_metric
from .harness import (
    ResultRow,
    ScenarioConfig,
    ScenarioInfeasible,
    best_worst_sweep,
    config_from_fixtures,
    run_suite,
    sample_scenario,
)
from .kinematics import ArmModel, analytic_ik, forward_kinematics, ik_solution_set
from .metrics import RankedGraspSet, arm_metric, rank_average, rank_m_ag
from .planner import JointPath, execute_task, plan_rrt
from .tasks import PickPlaceTask, PouringTask, check_tilt_feasible, goal_pose_guesses, pouring_goal_guesses
from .transforms import RigidTransform
from .world import Box, Scene, SqObject, arm_in_collision, object_pose_in_collision

__version__ = "0.1.0"

__all__ = [
    "ArmModel",
    "Box",
    "FixtureError",
    "Fixtures",
    "Grasp",
    "JointPath",
    "PickPlaceTask",
    "PouringTask",
    "RankedGraspSet",
    "ResultRow",
    "RigidTransform",
    "ScenarioConfig",
    "ScenarioInfeasible",
    "Scene",
    "SqObject",
    "analytic_ik",
    "arm_in_collision",
    "arm_metric",
    "best_worst_sweep",
    "check_tilt_feasible",
    "config_from_fixtures",
    "execute_task",
    "forward_kinematics",
    "generate_grasps",
    "goal_pose_guesses",
    "grasp_metric",
    "ik_solution_set",
    "load_fixtures",
    "object_pose_in_collision",
    "parse_fixtures",
    "plan_rrt",
    "pouring_goal_guesses",
    "rank_average",
    "rank_m_ag",
    "run_suite",
    "sample_scenario",
]
