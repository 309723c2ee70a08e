import numpy as np
import pytest

from fieldlang.core import (
    BadMagicError,
    CsvFormatError,
    DimensionMismatchError,
    FieldSnapshot,
    FluidProperties,
    GridSpec,
    NonFiniteValueError,
    TruncatedPayloadError,
    export_csv,
    import_csv,
    load_case,
    load_field,
    load_sidecar,
    save_case,
    save_field,
    save_sidecar,
    sidecar_path,
    validate,
)
from fieldlang import synth

from conftest import make_snapshot


def test_grid_spec_spacing():
    grid = GridSpec(width=5, height=3, x_min=0.0, x_max=2.0, y_min=-1.0, y_max=1.0)
    assert grid.dx == pytest.approx(0.5)
    assert grid.dy == pytest.approx(1.0)
    assert grid.node_position(0, 0) == (0.0, -1.0)
    assert grid.node_position(2, 4) == (2.0, 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"width": 1, "height": 4},
        {"width": 4, "height": 1},
        {"width": 4, "height": 4, "x_min": 1.0, "x_max": 1.0},
        {"width": 4, "height": 4, "y_min": 2.0, "y_max": 0.0},
    ],
)
def test_grid_spec_rejects_bad_geometry(kwargs):
    with pytest.raises(ValueError):
        GridSpec(**kwargs)


def test_fluid_properties_validation():
    FluidProperties(rho=1.0, mu=0.01, U=0.0, L=1.0)
    with pytest.raises(ValueError):
        FluidProperties(rho=0.0, mu=0.01, U=1.0, L=1.0)
    with pytest.raises(ValueError):
        FluidProperties(rho=1.0, mu=0.0, U=1.0, L=1.0)
    with pytest.raises(ValueError):
        FluidProperties(rho=1.0, mu=0.01, U=-1.0, L=1.0)


def test_save_field_size_is_header_plus_payload(tmp_path):
    # 16-byte header + 3 channels * 4 cells * 8 bytes = 112 bytes for a 2x2 field.
    snap = make_snapshot(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    path = tmp_path / "tiny.fld"
    save_field(snap, path)
    assert path.stat().st_size == 112


def test_zero_field_round_trip(tmp_path):
    snap = make_snapshot(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))
    path = tmp_path / "zeros.fld"
    save_field(snap, path)
    loaded = load_field(path)
    for arr in (loaded.u, loaded.v, loaded.p):
        assert arr.shape == (4, 4)
        assert np.count_nonzero(arr) == 0


def test_round_trip_is_identity_on_bytes_and_values(tmp_path, tg256):
    path = tmp_path / "tg.fld"
    save_field(tg256.snapshot, path)
    first = path.read_bytes()
    loaded = load_field(path)
    assert np.array_equal(loaded.u, tg256.snapshot.u)
    assert np.array_equal(loaded.v, tg256.snapshot.v)
    assert np.array_equal(loaded.p, tg256.snapshot.p)
    again = tmp_path / "tg2.fld"
    save_field(loaded, again)
    assert again.read_bytes() == first


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.fld"
    path.write_bytes(b"XXXX" + b"\x00" * 108)
    with pytest.raises(BadMagicError):
        load_field(path)


def test_load_rejects_truncated_payload(tmp_path):
    snap = make_snapshot(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))
    path = tmp_path / "trunc.fld"
    save_field(snap, path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(TruncatedPayloadError):
        load_field(path)


def test_load_rejects_trailing_garbage(tmp_path):
    snap = make_snapshot(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))
    path = tmp_path / "extra.fld"
    save_field(snap, path)
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(DimensionMismatchError):
        load_field(path)


def test_load_rejects_non_finite_payload(tmp_path):
    snap = make_snapshot(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))
    path = tmp_path / "nan.fld"
    save_field(snap, path)
    data = bytearray(path.read_bytes())
    data[16:24] = np.float64(np.nan).tobytes()
    path.write_bytes(bytes(data))
    with pytest.raises(NonFiniteValueError):
        load_field(path)


def test_save_rejects_non_finite(tmp_path):
    u = np.zeros((4, 4))
    u[1, 2] = np.inf
    snap = make_snapshot(u, np.zeros((4, 4)), np.zeros((4, 4)))
    with pytest.raises(NonFiniteValueError):
        save_field(snap, tmp_path / "nope.fld")


def test_save_to_unwritable_path_raises_oserror(tmp_path):
    snap = make_snapshot(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(OSError):
        save_field(snap, tmp_path)  # a directory, not a file


def test_validate_clean_snapshot():
    snap = make_snapshot(np.ones((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))
    assert validate(snap) == []


def test_validate_reports_nan_with_channel_and_cell():
    v = np.zeros((8, 8))
    v[3, 5] = np.nan
    snap = make_snapshot(np.zeros((8, 8)), v, np.zeros((8, 8)))
    violations = validate(snap)
    assert len(violations) == 1
    assert violations[0].kind == "non-finite"
    assert violations[0].channel == "v"
    assert violations[0].cell == (3, 5)


def test_validate_reports_dimension_mismatch():
    grid = GridSpec(width=8, height=8)
    snap = FieldSnapshot(grid=grid, u=np.zeros((4, 4)), v=np.zeros((8, 8)), p=np.zeros((8, 8)))
    violations = validate(snap)
    assert any(vi.kind == "dimension" and vi.channel == "u" for vi in violations)


def test_import_csv_zeros(tmp_path):
    grid = GridSpec(width=2, height=2)
    for name in ("u", "v", "p"):
        (tmp_path / f"{name}.csv").write_text("0,0\n0,0\n")
    snap = import_csv(tmp_path / "u.csv", tmp_path / "v.csv", tmp_path / "p.csv", grid)
    assert np.count_nonzero(snap.u) == 0


def test_import_csv_names_bad_cell(tmp_path):
    grid = GridSpec(width=2, height=2)
    (tmp_path / "u.csv").write_text("0,0\n0,abc\n")
    for name in ("v", "p"):
        (tmp_path / f"{name}.csv").write_text("0,0\n0,0\n")
    with pytest.raises(CsvFormatError, match=r"row 1, column 1"):
        import_csv(tmp_path / "u.csv", tmp_path / "v.csv", tmp_path / "p.csv", grid)


def test_import_csv_rejects_ragged_rows(tmp_path):
    grid = GridSpec(width=2, height=2)
    (tmp_path / "u.csv").write_text("0,0\n0,0,0\n")
    for name in ("v", "p"):
        (tmp_path / f"{name}.csv").write_text("0,0\n0,0\n")
    with pytest.raises(CsvFormatError):
        import_csv(tmp_path / "u.csv", tmp_path / "v.csv", tmp_path / "p.csv", grid)


def test_csv_round_trip_exact_for_lamb_oseen(tmp_path):
    case = synth.gen_lamb_oseen(
        64, [synth.LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.1)]
    )
    paths = {name: tmp_path / f"{name}.csv" for name in ("u", "v", "p")}
    export_csv(case.snapshot, paths["u"], paths["v"], paths["p"])
    back = import_csv(paths["u"], paths["v"], paths["p"], case.snapshot.grid)
    assert np.abs(back.u - case.snapshot.u).max() <= 1e-9
    assert np.abs(back.v - case.snapshot.v).max() <= 1e-9
    assert np.abs(back.p - case.snapshot.p).max() <= 1e-9


def test_sidecar_round_trip(tmp_path):
    props = FluidProperties(rho=1.2, mu=1.8e-5, U=2.5, L=0.4)
    case = synth.gen_taylor_green(16)
    path = tmp_path / "case.props.json"
    save_sidecar(path, props, truth=case.truth, grid=case.snapshot.grid)
    props2, truth2, domain = load_sidecar(path)
    assert props2 == props
    assert truth2 == case.truth
    assert domain == {"x_min": 0.0, "x_max": 1.0, "y_min": 0.0, "y_max": 1.0}


def test_save_case_load_case_round_trip(tmp_path):
    case = synth.gen_channel(32, 1.5)
    field_path = tmp_path / "chan.fld"
    save_case(field_path, case.snapshot, case.props, truth=case.truth)
    assert sidecar_path(field_path).exists()
    snap, props, truth = load_case(field_path)
    assert np.array_equal(snap.u, case.snapshot.u)
    assert props == case.props
    assert truth == case.truth
    assert snap.grid == case.snapshot.grid


def test_load_case_applies_sidecar_domain(tmp_path):
    grid = GridSpec(width=8, height=8, x_min=-2.0, x_max=2.0, y_min=0.0, y_max=8.0)
    snap = FieldSnapshot(grid=grid, u=np.ones((8, 8)), v=np.zeros((8, 8)), p=np.zeros((8, 8)))
    props = FluidProperties(rho=1.0, mu=0.1, U=1.0, L=1.0)
    save_case(tmp_path / "dom.fld", snap, props)
    loaded, _, _ = load_case(tmp_path / "dom.fld")
    assert loaded.grid == grid
