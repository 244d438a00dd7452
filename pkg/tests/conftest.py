import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from vowifi_advtest import testgen, transformer  # noqa: E402
from vowifi_advtest.corpus import build_corpus  # noqa: E402
from vowifi_advtest.testcase import Command, TestCase  # noqa: E402
from vowifi_advtest.ue import resolve_profile  # noqa: E402


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


@pytest.fixture(scope="session")
def flow():
    return testgen.build_flow_graph()


@pytest.fixture(scope="session")
def config():
    return transformer.load_config()


@pytest.fixture
def compliant():
    return resolve_profile("compliant")


HAPPY = [("epdg", "ike_sa_init_response"), ("epdg", "eap_aka_challenge"), ("epdg", "eap_success"),
         ("ims", "401_unauthorized"), ("ims", "200_ok")]


def benign_prefix(upto):
    """Send commands along the happy path up to and including message ``upto``."""
    cmds = []
    for i, (r, n) in enumerate(HAPPY):
        cmds.append(Command(i + 1, r, "send", n))
        if n == upto:
            break
    return cmds


def make_tc(commands, tc_id="t", kind="ATC"):
    return TestCase(tc_id, kind, list(commands), {})


def atc_with(upto, **final):
    """Benign prefix whose final command is replaced by the given fields."""
    cmds = benign_prefix(upto)
    last = cmds[-1]
    fields = dict(id=last.id, receiver=last.receiver, name=last.name, op="send")
    fields.update(final)
    cmds[-1] = Command(**fields)
    return make_tc(cmds)
