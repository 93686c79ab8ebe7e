"""
Scenario loading, seeded end-to-end runs, scoring and reporting.
"""

from harness.scenario import Scenario, ScenarioError, load_scenario, parse_scenario
