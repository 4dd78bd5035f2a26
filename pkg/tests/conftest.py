import numpy as np
import pytest

import qpush as qp


@pytest.fixture(scope="session")
def fig1_instance():
    return qp.get_problem("fig1-num")


@pytest.fixture(scope="session")
def fig1_vq_run(fig1_instance):
    """The headline configuration: alpha 10, zero start, 1e5 iterations."""
    program = fig1_instance.program
    return qp.run(program, np.zeros(program.n), 10.0, 100_000, label="fig1-num")


@pytest.fixture(scope="session")
def fig1_dsg_run(fig1_instance):
    program = fig1_instance.program
    return qp.dsg_run(program, None, 0.01, 100_000, label="fig1-num")


@pytest.fixture(scope="session")
def flow_power_vq_run():
    inst = qp.get_problem("fig1-flow-power")
    return qp.run(inst.program, np.zeros(inst.program.n), 10.0, 100_000,
                  label="fig1-flow-power")


@pytest.fixture(scope="session")
def qp_seed1():
    return qp.generate_qp(1)


@pytest.fixture(scope="session")
def qp_vq_run(qp_seed1):
    program = qp_seed1.program()
    alpha = 0.5 * qp_seed1.beta() ** 2 + 1.0
    return qp.run(program, np.zeros(program.n), alpha, 100_000, label="qp(seed=1)")
