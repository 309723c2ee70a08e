import json

import numpy as np
import pytest

from fieldlang import synth
from fieldlang.cli import main
from fieldlang.codec import save_codebook, train_codebook, extract_patches, to_rgb
from fieldlang.langgen import parse_training_record


@pytest.fixture()
def small_codebook(tmp_path):
    """K=32, s=16 codebook trained on a handful of 64x64 fields."""
    batches = []
    for case in (
        synth.gen_taylor_green(64),
        synth.gen_channel(64, 1.0),
        synth.gen_lamb_oseen(
            64, [synth.LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.1)]
        ),
    ):
        batches.append(extract_patches(to_rgb(case.snapshot), 16))
    codebook = train_codebook(np.concatenate(batches), 32, seed=42)
    path = tmp_path / "small.fcb"
    save_codebook(codebook, path)
    return path


def _write_case(tmp_path, case, name):
    named = synth.SynthCase(name, case.snapshot, case.truth, case.props)
    synth.write_case(named, tmp_path)
    return tmp_path / f"{name}.fld"


def _write_manifest(tmp_path, cases):
    manifest = tmp_path / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for i, case in enumerate(cases):
            named = synth.SynthCase(f"case_{i}", case.snapshot, case.truth, case.props)
            entry = synth.write_case(named, tmp_path)
            fh.write(json.dumps(entry) + "\n")
    return manifest


def test_synth_single_case(tmp_path, capsys):
    code = main(["synth", "taylor-green", "--n", "64", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "taylor-green.fld").exists()
    assert (tmp_path / "taylor-green.props.json").exists()


def test_synth_unknown_case_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["synth", "warp-drive", "--out", str(tmp_path)])
    assert err.value.code == 2


def test_unknown_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["synth", "uniform", "--does-not-exist", "1"])
    assert err.value.code == 2


def test_synth_png_export(tmp_path):
    code = main(["synth", "uniform", "--n", "32", "--out", str(tmp_path), "--png"])
    assert code == 0
    assert (tmp_path / "uniform.png").exists()
    assert (tmp_path / "uniform.meta.json").exists()


def test_analyze_prints_report_json(tmp_path, capsys):
    field = _write_case(tmp_path, synth.gen_uniform(64, 1.0, 0.0), "uni")
    code = main(["analyze", str(field)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["flow"]["label"] == "uniform"
    assert doc["vortices"] == []


def test_analyze_lamb_detects_one_vortex(tmp_path, capsys):
    case = synth.gen_lamb_oseen(
        128, [synth.LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.08)]
    )
    field = _write_case(tmp_path, case, "lamb")
    code = main(["analyze", str(field)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["vortices"]) == 1


def test_analyze_missing_sidecar_fails(tmp_path, capsys):
    field = _write_case(tmp_path, synth.gen_uniform(32, 1.0, 0.0), "uni")
    (tmp_path / "uni.props.json").unlink()
    code = main(["analyze", str(field)])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_compress_256_field(tmp_path, capsys, small_codebook):
    field = _write_case(tmp_path, synth.gen_taylor_green(256), "tg")
    code = main([
        "compress", str(field), "--codebook", str(small_codebook), "--out", str(tmp_path),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "tokens: 256" in out
    assert "reduction: 99.609%" in out
    tokens = json.loads((tmp_path / "tg.tokens.json").read_text())
    assert len(tokens) == 256
    stats = json.loads((tmp_path / "tg.stats.json").read_text())
    assert stats["token_count"] == 256


def test_compress_64_field_yields_16_tokens(tmp_path, capsys, small_codebook):
    field = _write_case(tmp_path, synth.gen_channel(64, 1.0), "chan")
    code = main([
        "compress", str(field), "--codebook", str(small_codebook), "--out", str(tmp_path),
    ])
    assert code == 0
    assert "tokens: 16" in capsys.readouterr().out


def test_compress_size_mismatch_fails(tmp_path, capsys, small_codebook):
    field = _write_case(tmp_path, synth.gen_uniform(40, 1.0, 0.0), "odd")
    code = main([
        "compress", str(field), "--codebook", str(small_codebook), "--out", str(tmp_path),
    ])
    assert code == 1


def test_compress_png_outputs(tmp_path, small_codebook):
    field = _write_case(tmp_path, synth.gen_taylor_green(64), "tg64")
    code = main([
        "compress", str(field), "--codebook", str(small_codebook),
        "--out", str(tmp_path), "--png",
    ])
    assert code == 0
    assert (tmp_path / "tg64.png").exists()
    assert (tmp_path / "tg64.recon.png").exists()
    assert (tmp_path / "tg64.comparison.png").exists()


def test_train_codebook_command(tmp_path, capsys):
    manifest = _write_manifest(
        tmp_path,
        [synth.gen_taylor_green(64), synth.gen_channel(64, 1.0), synth.gen_uniform(64, 1.0, 0.0)],
    )
    out = tmp_path / "trained.fcb"
    code = main([
        "train-codebook", str(manifest), "--out", str(out),
        "--entries", "16", "--patch-size", "16",
    ])
    assert code == 0
    assert out.exists()
    assert "K=16" in capsys.readouterr().out


def test_describe_vortex_task(tmp_path, capsys):
    case = synth.gen_lamb_oseen(
        128, [synth.LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.08)]
    )
    field = _write_case(tmp_path, case, "lamb")
    code = main(["describe", str(field), "--task", "vortex"])
    assert code == 0
    out = capsys.readouterr().out
    assert "vortex 1: [length" in out
    assert "rotation direction: counterclockwise" in out


def test_describe_record_mode(tmp_path, capsys, small_codebook):
    field = _write_case(tmp_path, synth.gen_channel(64, 1.0), "chan")
    code = main([
        "describe", str(field), "--task", "categorize", "--record",
        "--codebook", str(small_codebook),
    ])
    assert code == 0
    line = capsys.readouterr().out.rstrip("\n")
    field_ref, question, answer = parse_training_record(line)
    assert field_ref.startswith("[") and field_ref.endswith("]")
    assert question.startswith("Judge the type of flow field")
    assert "channel" in answer


def test_describe_with_unreachable_polisher(tmp_path, capsys):
    field = _write_case(tmp_path, synth.gen_uniform(32, 1.0, 0.0), "uni")
    code = main([
        "describe", str(field), "--task", "reynolds",
        "--polisher", "http://127.0.0.1:9/polish",
    ])
    assert code == 0
    captured = capsys.readouterr()
    assert "100.00" in captured.out
    assert "warning" in captured.err.lower()


def test_dataset_command(tmp_path, capsys, small_codebook):
    manifest = _write_manifest(tmp_path, [synth.gen_channel(64, 1.0), synth.gen_uniform(64, 1.0, 0.0)])
    out = tmp_path / "records.txt"
    code = main(["dataset", str(manifest), "--codebook", str(small_codebook), "--out", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 8  # 2 entries x 4 tasks
    for line in lines:
        field_ref, question, answer = parse_training_record(line)
        assert field_ref.startswith("[")


def test_eval_builtin_with_figures(tmp_path, capsys):
    manifest = _write_manifest(
        tmp_path,
        [synth.gen_uniform(64, 1.0, 0.0), synth.gen_channel(64, 1.0), synth.gen_taylor_green(64)],
    )
    out_dir = tmp_path / "reports"
    code = main(["eval", str(manifest), "--out", str(out_dir), "--figures"])
    assert code == 0
    printed = capsys.readouterr().out
    for task in ("categorize", "reynolds", "vortex", "field_analysis"):
        assert task in printed
    assert (out_dir / "report.json").exists()
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "report.md").exists()
    assert (out_dir / "accuracy.png").exists()


def test_eval_empty_manifest(tmp_path, capsys):
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("")
    code = main(["eval", str(manifest), "--out", str(tmp_path / "r")])
    assert code == 0
    assert "0 samples" in capsys.readouterr().out


def test_eval_unreadable_manifest(tmp_path, capsys):
    code = main(["eval", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path)])
    assert code == 1
