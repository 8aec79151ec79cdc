import pytest

from garnier.model import build_system, impose_relation


@pytest.fixture(scope="session")
def system():
    return build_system()


@pytest.fixture(scope="session")
def imposed(system):
    return impose_relation(system, 0)


class _Lazy:
    """Memo of expensive verdicts shared across test modules."""

    def __init__(self, compute):
        self._compute = compute
        self._memo = {}

    def __call__(self, key):
        if key not in self._memo:
            self._memo[key] = self._compute(key)
        return self._memo[key]


@pytest.fixture(scope="session")
def backlund_verdict(system):
    from garnier.backlund import backlund_map, verify_backlund

    return _Lazy(lambda name: verify_backlund(backlund_map(name), system))


@pytest.fixture(scope="session")
def holomorphy_reports(system):
    from garnier.charts import verify_all_charts

    return {r.chart: r for r in verify_all_charts(system, 0)}


@pytest.fixture(scope="session")
def boundary_fields(imposed):
    from garnier.singular import boundary_chart, to_boundary_chart

    out = {}
    for name in ("X3", "X4"):
        ch = boundary_chart(name)
        out[name] = (ch, to_boundary_chart(imposed, ch))
    return out


@pytest.fixture(scope="session")
def singular_loci(boundary_fields):
    from garnier.singular import find_accessible_singularities

    return {name: find_accessible_singularities(fld, ch) for name, (ch, fld) in boundary_fields.items()}


@pytest.fixture(scope="session")
def blow_ups(system):
    from garnier.singular import BOUNDARY_LOCI, blow_up_pipeline

    return _Lazy(lambda locus: blow_up_pipeline(system, locus, strict=False))
