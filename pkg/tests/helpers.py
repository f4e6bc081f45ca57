from arpfb.harness import Scenario

# descending 21 -> -22 MHz over 200 ms
STAIRCASE_SWEEP = {"center": -0.5, "span": 43.0, "rate": -0.215}


def make(kind, seed=0, **sections):
    """Scenario from partial config sections, e.g. make("CLOSED_LOOP", field={"bz": 7.0})."""
    return Scenario.build(kind, sections, seed)
