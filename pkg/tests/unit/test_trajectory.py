"""Unit tests for trajectories, their algebraic form and joint-space images."""
import csv
import pytest
from fractions import Fraction

from src.interval import Interval
from src.polycore import VarSet, parse_poly
from src.robotmodel import WorkingMode, load_model
from src.trajectory import (COS, SIN, TIME, Harmonic, TimeDomain, TrajectoryError, TrigPoly,
                            algebraize, branch_closed_form, build_psi, export_polylines,
                            feasible_modes, joint_path_eval, joint_paths, load_trajectory,
                            project_to_jointspace, trajectory_from_dict)

# Rational points on the unit circle.
CIRCLE_POINTS = [(Fraction(3, 5), Fraction(4, 5)), (Fraction(-5, 13), Fraction(12, 13)),
                 (Fraction(0), Fraction(-1)), (Fraction(-8, 17), Fraction(-15, 17))]


@pytest.fixture(scope="module")
def orthoglide():
    return load_model("orthoglide")


@pytest.fixture(scope="module")
def images(orthoglide):
    """Joint-space images of the built-in trajectories, computed once."""
    out = {}
    for name in ("heart1", "heart2", "helix"):
        tr = load_trajectory(name)
        out[name] = (tr, project_to_jointspace(build_psi(orthoglide, tr), orthoglide))
    return out


def _at(p, s, c, t=None):
    point = {SIN: s, COS: c}
    if t is not None:
        point[TIME] = t
    return p.specialize(point).constant_value()


def test_SGT_F_015_chebyshev_expansion():
    """Test harmonics expand to exact polynomials in sin and cos (SGT-F-015)."""
    sc = VarSet((SIN, COS))
    assert TrigPoly(harmonics=(Harmonic(3, sin=Fraction(1)),)).to_poly(sc) == \
        parse_poly("3*sin_t - 4*sin_t^3", sc)
    assert TrigPoly(harmonics=(Harmonic(2, sin=Fraction(1)),)).to_poly(sc) == \
        parse_poly("2*sin_t*cos_t", sc)
    assert TrigPoly(harmonics=(Harmonic(4, cos=Fraction(1)),)).to_poly(sc) == \
        parse_poly("8*cos_t^4 - 8*cos_t^2 + 1", sc)
    with pytest.raises(TrajectoryError):
        TrigPoly(harmonics=(Harmonic(0, cos=Fraction(1)),))
    with pytest.raises(TrajectoryError, match="time variable"):
        TrigPoly(linear=Fraction(1)).to_poly(sc)


def test_SGT_F_015_heart_algebraic_form():
    """Test the heart curve coordinates as polynomials (SGT-F-015)."""
    tr = load_trajectory("heart1")
    sc = VarSet((SIN, COS))
    x, y, z = (c.to_poly(sc) for c in tr.coords)
    assert x == parse_poly("8/7*sin_t^3", sc)
    assert y == parse_poly("-4/7*cos_t^4 - 2/5*cos_t^3 - 1/7*cos_t^2 + 43/35*cos_t + 2/7", sc)
    assert z == parse_poly("1", sc)
    heart2 = load_trajectory("heart2")
    assert heart2.coords[0].to_poly(sc) == parse_poly("4/5*sin_t^3", sc)

    eqs = algebraize(tr)
    assert len(eqs) == 4
    assert eqs[-1] == parse_poly("sin_t^2 + cos_t^2 - 1", eqs[-1].varset)
    assert not tr.is_mixed and tr.trig_vars == (SIN, COS)


def test_SGT_F_015_time_domains():
    """Test time domains in radians and in units of pi (SGT-F-015)."""
    heart = load_trajectory("heart1").domain
    assert heart.is_full_turn()
    assert heart.describe() == "[-1*pi, 1*pi]"
    enc = heart.enclosure()
    assert enc.lo < Fraction(-314159, 100000) and enc.hi > Fraction(314159, 100000)
    lo, hi = heart.bounds()
    assert hi == pytest.approx(3.141592653589793)
    samples = TimeDomain(Fraction(0), Fraction(20)).samples(5)
    assert samples == [0, 5, 10, 15, 20]
    with pytest.raises(TrajectoryError):
        TimeDomain(Fraction(1), Fraction(1))
    with pytest.raises(TrajectoryError):
        TimeDomain(Fraction(0), Fraction(1), unit='deg')
    with pytest.raises(TrajectoryError):
        TimeDomain(Fraction(0), Fraction(1)).samples(1)


def test_SGT_F_015_trajectory_validation(tmp_path):
    """Test malformed trajectory descriptions are rejected (SGT-F-015)."""
    with pytest.raises(TrajectoryError, match="domain"):
        trajectory_from_dict({"coords": {}})
    with pytest.raises(TrajectoryError, match="'y'"):
        trajectory_from_dict({"coords": {"x": {}}, "domain": {"lo": 0, "hi": 1}})
    coords = {"x": {"linear": "1"}, "y": {}, "z": {}}
    with pytest.raises(TrajectoryError, match="non-pi"):
        trajectory_from_dict({"coords": coords, "domain": {"lo": 0, "hi": 1, "unit": "pi"}})
    with pytest.raises(TrajectoryError, match="rational"):
        trajectory_from_dict({"coords": {"x": {"constant": "abc"}, "y": {}, "z": {}},
                              "domain": {"lo": 0, "hi": 1}})
    broken = tmp_path / "broken.json"
    broken.write_text("{\"coords\": [")
    with pytest.raises(TrajectoryError, match="line 1"):
        load_trajectory(str(broken))
    with pytest.raises(TrajectoryError, match="Cannot read"):
        load_trajectory(str(tmp_path / "missing.json"))


def test_SGT_F_016_jointspace_generators(images):
    """Test the joint-space image has one quadratic per leg plus the circle (SGT-F-016)."""
    for name, (tr, img) in images.items():
        assert len(img.generators) == 4, name
        assert img.branch_count == 8
        assert img.varset.names[:3] == ('rho1', 'rho2', 'rho3')
        for leg in img.legs:
            assert leg.a.is_constant()


def test_SGT_F_016_heart_closed_forms(images):
    """Test rho = centre +- sqrt(radicand) on the heart curves (SGT-F-016)."""
    tr, img = images["heart1"]
    centre, radicand = branch_closed_form(img, 1)
    sc = VarSet((SIN, COS))
    x, y, _ = (c.to_poly(sc) for c in tr.coords)
    for s, c in CIRCLE_POINTS:
        assert _at(centre, s, c) == _at(y, s, c)
        assert _at(radicand, s, c) == (64 * c ** 6 - 192 * c ** 4 + 192 * c ** 2 + 83) / 49
    # Legs along x and z: rho1 = x +- sqrt(3 - y^2), rho3 = 1 +- sqrt(4 - x^2 - y^2).
    c1, r1 = branch_closed_form(img, 0)
    c3, r3 = branch_closed_form(img, 2)
    for s, c in CIRCLE_POINTS:
        xv, yv = _at(x, s, c), _at(y, s, c)
        assert _at(c1, s, c) == xv and _at(r1, s, c) == 3 - yv ** 2
        assert _at(c3, s, c) == 1 and _at(r3, s, c) == 4 - xv ** 2 - yv ** 2

    tr2, img2 = images["heart2"]
    centre2, radicand2 = branch_closed_form(img2, 1)
    for s, c in CIRCLE_POINTS:
        assert _at(centre2, s, c) == (-Fraction(2, 5) * c ** 4 - Fraction(1, 5) * c ** 3
                                      - Fraction(1, 10) * c ** 2 + Fraction(4, 5) * c + Fraction(1, 5))
        assert _at(radicand2, s, c) == (16 * c ** 6 - 48 * c ** 4 + 48 * c ** 2 + 59) / 25
    assert _at(branch_closed_form(img2, 0)[1], Fraction(0), Fraction(1)) == Fraction(291, 100)


def test_SGT_F_016_helix_closed_forms(images):
    """Test closed forms on the helix, which is linear in t (SGT-F-016)."""
    tr, img = images["helix"]
    assert tr.is_mixed and TIME in img.varset
    for s, c in CIRCLE_POINTS:
        for t in (Fraction(0), Fraction(7), Fraction(20)):
            c1, r1 = (_at(p, s, c, t) for p in branch_closed_form(img, 0))
            c2, r2 = (_at(p, s, c, t) for p in branch_closed_form(img, 1))
            c3, r3 = (_at(p, s, c, t) for p in branch_closed_form(img, 2))
            assert (c1, r1) == (s, s ** 2 - t ** 2 / 400 + 3)
            assert (c2, r2) == (c, c ** 2 - t ** 2 / 400 + 3)
            assert (c3, r3) == (t / 20, 3)


def test_SGT_F_017_feasible_working_modes(images):
    """Test exactly one working mode stays within the joint limits (SGT-F-017)."""
    for name, (tr, img) in images.items():
        assert feasible_modes(img, tr, samples=32, threads=2) == [WorkingMode((1, 1, 1))], name


def test_SGT_F_017_joint_paths_and_export(images, tmp_path):
    """Test certified joint samples and their CSV export (SGT-F-017)."""
    tr, img = images["helix"]
    rows = joint_path_eval(img, WorkingMode((1, 1, 1)), [Fraction(0), Fraction(10)])
    assert all(r.feasible for r in rows)
    # At t = 0: rho1 = 0 + sqrt(3), rho2 = 1 + 2, rho3 = sqrt(3).
    assert rows[0].rho[1].contains(3)
    assert abs(float(rows[0].rho[0].mid) - 3 ** 0.5) < 1e-12
    low = joint_path_eval(img, WorkingMode((-1, 1, 1)), [Fraction(0)])
    assert not low[0].feasible and low[0].reachable
    with pytest.raises(TrajectoryError):
        joint_path_eval(img, WorkingMode((1, 1)), [Fraction(0)])

    out = tmp_path / "paths" / "helix.csv"
    export_polylines(rows, out, ('rho1', 'rho2', 'rho3'))
    with out.open() as fh:
        table = list(csv.reader(fh))
    assert table[0] == ['t', 'rho1', 'rho2', 'rho3', 'feasible']
    assert table[1][0] == '0' and table[1][-1] == '1'
    assert len(table) == 3


def test_SGT_F_015_trig_enclosure():
    """Test interval enclosures of trajectory coordinates (SGT-F-015)."""
    tr = load_trajectory("heart1")
    box = tr.pose_enclosure(Interval(Fraction(1, 2)))
    assert box['z'] == Interval(1)
    assert box['x'].width < Fraction(1, 2 ** 50)
    values = tr.coords[0].evaluate([0.0, 0.5])
    assert values[0] == 0.0
    assert abs(values[1] - 8 / 7 * 0.479425538604203 ** 3) < 1e-12


def test_SGT_F_017_branch_multiplicity(images):
    """Test every sample has 8 real branches and exactly one within the limits (SGT-F-017)."""
    modes = WorkingMode.all(3)
    for name, (tr, img) in images.items():
        paths = joint_paths(img, modes, tr.domain.samples(16), threads=2)
        for i in range(16):
            assert all(paths[mode][i].reachable for mode in modes), name
            assert sum(paths[mode][i].feasible for mode in modes) == 1, name
