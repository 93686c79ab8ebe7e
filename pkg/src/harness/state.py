from typing import Dict, Optional, TypedDict

from harness.scenario import Scenario


class RunState(TypedDict):
    scenario: Scenario
    seed: int
    simulation: Optional[object]  # SimulationResult of the run under test
    references: Dict[str, object]  # paired reference runs by purpose
    report: Dict
    timing: Dict


def get_initial_state(scenario: Scenario, seed: Optional[int] = None) -> RunState:
    return {
        "scenario": scenario,
        "seed": scenario.seed if seed is None else seed,
        "simulation": None,
        "references": {},
        "report": {},
        "timing": {},
    }
