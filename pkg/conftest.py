#!/usr/bin/env python3
"""
Shared fixtures: a two-lamp toy world, a small kitchen scenario on the
household domain, and the shipped assets.
"""

import sys
from pathlib import Path

import pytest

# Add current directory to module search path
sys.path.insert(0, str(Path(__file__).parent))

from core.grounding import ground
from core.rddl_lite import load_domain, parse_domain, parse_instance
from utils.io_handler import IOHandler

BASE_DIR = Path(__file__).resolve().parent

LAMPS_DOMAIN = """
domain lamps {
    types {
        robot : object;
        human : object;
        lamp : object;
    };

    pvariables {
        bright(lamp) : { non-fluent, bool, default = false };
        lit(lamp) : { state-fluent, bool, default = false };
        dusty(lamp) : { state-fluent, bool, default = false };
        human-ok : { interm-fluent, bool, default = true };
        robot_switch(robot, lamp) : { action-fluent, bool, default = false };
        robot_dust(robot, lamp) : { action-fluent, bool, default = false };
        human_switch(human, lamp) : { action-fluent, bool, default = false };
    };

    cpfs {
        lit'(?l) =
            lit(?l)
            | exists_{?r : robot}[robot_switch(?r, ?l)]
            | (human-ok ^ exists_{?h : human}[human_switch(?h, ?l)]);
        dusty'(?l) =
            if (exists_{?r : robot}[robot_dust(?r, ?l)]) then Bernoulli(0.25)
            else dusty(?l);
    };

    reward {
        lighting (2) : sum_{?l : lamp}[lit'(?l) ^ ~lit(?l)];
    };

    action-preconditions {
        robot_switch(?r, ?l) => ~lit(?l);
        robot_dust(?r, ?l) => bright(?l);
        human_switch(?h, ?l) => ~lit(?l);
    };

    action-costs {
        default = -1;
    };
}
"""

LAMPS_INSTANCE = """
instance two_lamps {
    domain = lamps;
    objects {
        robot : {r};
        human : {h};
        lamp : {a, b};
    };
    non-fluents {
        bright(a);
    };
    init-state {
        dusty(a);
    };
    goal {
        lit(a);
        lit(b);
    };
    horizon = 5;
}
"""

# Human and robot share the kitchen; the water glass is the only fragile
# item within reach and the human's next step is to pick it up.
KITCHEN_INSTANCE = """
instance glass_kitchen {
    domain = household;
    objects {
        robot : {robot};
        human : {human};
        item : {bread, toast, toaster, water_glass, mop};
        location : {counter, sink, toaster, table, closet};
        room : {kitchen, dining_room, hallway};
    };
    non-fluents {
        in-room(counter, kitchen);
        in-room(sink, kitchen);
        in-room(toaster, kitchen);
        in-room(table, dining_room);
        in-room(closet, hallway);
        fixture(toaster);
        is-appliance(toaster);
        closable(closet);
        fragile(water_glass);
        liquid(water_glass);
        mop(mop);
        recipe(bread, toast, toaster);
    };
    init-state {
        robot-loc(robot, kitchen);
        human-loc(human, kitchen);
        obj-loc(bread, counter);
        obj-loc(water_glass, sink);
        obj-loc(mop, closet);
    };
    goal {
        obj-loc(toast, table);
    };
    horizon = 12;
}
"""


@pytest.fixture(scope="session")
def lamps_domain():
    return parse_domain(LAMPS_DOMAIN, "lamps.rddl")


@pytest.fixture(scope="session")
def lamps_instance(lamps_domain):
    return parse_instance(LAMPS_INSTANCE, lamps_domain, "two_lamps.rddl")


@pytest.fixture
def lamps(lamps_domain, lamps_instance):
    """Fresh grounded toy MDP (no goal reward attached)."""
    return ground(lamps_domain, lamps_instance)


@pytest.fixture(scope="session")
def household():
    return load_domain(BASE_DIR / "data" / "household.rddl")


@pytest.fixture
def kitchen(household):
    return ground(household, parse_instance(KITCHEN_INSTANCE, household, "glass_kitchen.rddl"))


@pytest.fixture(scope="session")
def assets():
    return IOHandler.load_assets(None, BASE_DIR)
