import numpy as np
import pytest

from trucktraffic.core import RoadLink
from trucktraffic.geo import LineString
from trucktraffic.synth import SynthConfig, generate_corpus

_ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS.append(report)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for report in sorted(_ACCEPTANCE_RESULTS, key=lambda r: r.nodeid):
        name = report.nodeid.split("::")[-1]
        label = name.replace("test_criterion_", "criterion ")
        status = "PASS" if report.passed else "FAIL"
        terminalreporter.write_line(
            f"{label}: {status} ({report.duration:.1f}s)")


def make_link(link_id="L1", state="10", county="10001", fc=3, urban=0, lanes=2,
              total=1000.0, mdv=None, hdv=None, x0=0.0, y0=0.0, length_m=1000.0,
              **kw):
    geom = LineString(np.array([[x0, y0], [x0 + length_m, y0]]))
    from trucktraffic.geo import line_length_km

    return RoadLink(
        link_id=link_id, state_fips=state, county_fips=county,
        functional_class=fc, urban_code=urban, through_lanes=lanes,
        geometry=geom, length_km=line_length_km(geom), aadt_total=total,
        aadt_mdv=mdv, aadt_hdv=hdv, **kw)


@pytest.fixture(scope="session")
def small_corpus():
    """1,200 fully observed links plus blocks; session-cached."""
    return generate_corpus(SynthConfig(
        n_links=1200, seed=101, missing_frac=0.0, single_missing_frac=0.0,
        block_grid=2))


@pytest.fixture(scope="session")
def mixed_corpus():
    """2,000 links with missing class values, the imputation workload."""
    return generate_corpus(SynthConfig(
        n_links=2000, seed=202, missing_frac=0.3, single_missing_frac=0.05,
        block_grid=2))
