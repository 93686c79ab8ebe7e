"""
Run workflow as a LangGraph state graph:

    simulate -> (reference, when scoring needs paired runs) -> score -> END
"""

import logging
from typing import Dict, Optional, Tuple

from langgraph.graph import END, StateGraph

from harness.scenario import Scenario
from harness.scoring import build_report, reference_plans, timing_report
from harness.simulation import run_simulation
from harness.state import RunState, get_initial_state

logger = logging.getLogger(__name__)


# --- Node functions ---

def simulate_node(state: RunState):
    """Runs the scenario under test."""
    return {"simulation": run_simulation(state["scenario"], state["seed"])}


def reference_node(state: RunState):
    """Runs every paired reference (clean / control) on the same seed."""
    references = {}
    for purpose, plan in reference_plans(state["scenario"]).items():
        logger.info("reference run %s for %s", purpose, state["scenario"].name)
        references[purpose] = run_simulation(plan, state["seed"])
    return {"references": references}


def score_node(state: RunState):
    sim = state["simulation"]
    return {"report": build_report(sim, state["references"]), "timing": timing_report(sim)}


def needs_reference(state: RunState):
    return "reference" if reference_plans(state["scenario"]) else "score"


# --- Build the graph ---

workflow = StateGraph(RunState)

workflow.add_node("simulate", simulate_node)
workflow.add_node("reference", reference_node)
workflow.add_node("score", score_node)

workflow.set_entry_point("simulate")
workflow.add_conditional_edges(
    "simulate",
    needs_reference,
    {"reference": "reference", "score": "score"},
)
workflow.add_edge("reference", "score")
workflow.add_edge("score", END)

graph = workflow.compile()


def run(scenario: Scenario, seed: Optional[int] = None) -> Tuple[Dict, Dict]:
    """(report, timing) for one seeded run of `scenario`."""
    final = graph.invoke(get_initial_state(scenario, seed))
    return final["report"], final["timing"]
