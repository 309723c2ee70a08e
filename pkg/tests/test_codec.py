import numpy as np
import pytest

from fieldlang import synth
from fieldlang.codec import (
    Codebook,
    CodebookFormatError,
    NormMeta,
    RgbFieldImage,
    assemble_patches,
    compression_stats,
    decode,
    encode,
    extract_patches,
    from_rgb,
    load_codebook,
    load_png,
    save_codebook,
    save_png,
    to_rgb,
    train_codebook,
)

from conftest import make_snapshot, random_snapshot


def test_to_rgb_half_up_rounding():
    row = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    snap = make_snapshot(
        np.tile(row, (2, 1)), np.zeros((2, 5)), np.zeros((2, 5))
    )
    image = to_rgb(snap)
    # 255*(c+1)/2 = 0, 63.75, 127.5, 191.25, 255 -> half-up 0, 64, 128, 191, 255
    assert list(image.pixels[0, :, 0]) == [0, 64, 128, 191, 255]
    assert image.meta.u_min == -1.0 and image.meta.u_max == 1.0


def test_to_rgb_constant_channel_maps_to_zero():
    snap = make_snapshot(np.full((4, 4), 5.0), np.zeros((4, 4)), np.zeros((4, 4)))
    image = to_rgb(snap)
    assert np.count_nonzero(image.pixels) == 0
    assert image.meta.u_min == image.meta.u_max == 5.0


def test_from_rgb_degenerate_channel_reconstructs_constant():
    meta = NormMeta(5.0, 5.0, 0.0, 0.0, 0.0, 0.0)
    image = RgbFieldImage(pixels=np.zeros((4, 4, 3), dtype=np.uint8), meta=meta)
    snap = from_rgb(image)
    assert np.all(snap.u == 5.0)


def test_from_rgb_byte_255_hits_channel_max():
    meta = NormMeta(-2.0, 3.0, 0.0, 1.0, 0.0, 1.0)
    pixels = np.zeros((2, 2, 3), dtype=np.uint8)
    pixels[..., 0] = 255
    snap = from_rgb(RgbFieldImage(pixels=pixels, meta=meta))
    assert np.all(snap.u == 3.0)


def test_rgb_round_trip_error_within_half_step():
    rng = np.random.default_rng(11)
    for _ in range(20):
        snap = random_snapshot(rng, 32)
        image = to_rgb(snap)
        back = from_rgb(image, grid=snap.grid)
        for name in ("u", "v", "p"):
            lo, hi = image.meta.bounds(name)
            bound = (hi - lo) / 255.0 / 2.0 + 1e-12
            err = np.abs(getattr(snap, name) - getattr(back, name)).max()
            assert err <= bound


def test_extract_patches_count_and_shape(tg256):
    image = to_rgb(tg256.snapshot)
    patches = extract_patches(image, 16)
    assert patches.shape == (256, 768)


def test_extract_patches_single_patch():
    snap = synth.gen_uniform(32, 1.0, 0.0).snapshot
    patches = extract_patches(to_rgb(snap), 32)
    assert patches.shape == (1, 32 * 32 * 3)


def test_extract_patches_rejects_non_divisor(tg256):
    with pytest.raises(ValueError):
        extract_patches(to_rgb(tg256.snapshot), 10)


def test_patch_layout_is_row_major_channel_minor():
    pixels = np.arange(2 * 2 * 3, dtype=np.uint8).reshape(2, 2, 3)
    image = RgbFieldImage(pixels=pixels, meta=NormMeta(0, 1, 0, 1, 0, 1))
    patches = extract_patches(image, 1)
    # Patch order (0,0), (0,1), (1,0), (1,1); each is that pixel's RGB triple.
    assert np.array_equal(patches, np.arange(12, dtype=float).reshape(4, 3))


def test_assemble_inverts_extract(tg256):
    image = to_rgb(tg256.snapshot)
    patches = extract_patches(image, 16)
    back = assemble_patches(patches, 16, 16, 16, image.meta)
    assert np.array_equal(back.pixels, image.pixels)


def test_train_exact_fit_on_distinct_vectors():
    # 8 distinct integer-valued patch vectors, K = 8: zero inertia and the
    # codebook is exactly the input set.
    points = ((np.arange(8)[:, None] * 31 + np.arange(12)[None, :] * 7) % 256).astype(float)
    codebook = train_codebook(points, 8, seed=1)
    assert codebook.inertia_history[0] == 0.0
    assert np.array_equal(
        np.sort(points, axis=0), np.sort(codebook.entries, axis=0)
    )


def test_train_is_deterministic():
    rng = np.random.default_rng(5)
    patches = rng.integers(0, 256, size=(200, 48)).astype(float)
    a = train_codebook(patches, 8, seed=42)
    b = train_codebook(patches, 8, seed=42)
    assert np.array_equal(a.entries, b.entries)
    assert a.inertia_history == b.inertia_history


def test_train_inertia_non_increasing():
    rng = np.random.default_rng(6)
    patches = rng.normal(128, 40, size=(500, 48)).clip(0, 255)
    codebook = train_codebook(patches, 16, seed=7)
    history = codebook.inertia_history
    assert len(history) >= 1
    assert all(a >= b for a, b in zip(history, history[1:]))


def test_train_two_cluster_oracle():
    # Two tight Gaussian clouds around integer-valued means; the snapped
    # entries land exactly on those means.
    rng = np.random.default_rng(7)
    dim = 48
    cloud_a = rng.normal(60.0, 2.0, size=(800, dim))
    cloud_b = rng.normal(200.0, 2.0, size=(800, dim))
    codebook = train_codebook(np.concatenate([cloud_a, cloud_b]), 2, seed=42)
    entries = codebook.entries[np.argsort(codebook.entries[:, 0])]
    assert np.abs(entries[0] - 60.0).max() <= 0.05
    assert np.abs(entries[1] - 200.0).max() <= 0.05


def test_train_rejects_too_few_patches():
    with pytest.raises(ValueError):
        train_codebook(np.zeros((3, 12)), 4, seed=0)


def test_encode_token_count(tg256, codebook512):
    tokens = encode(to_rgb(tg256.snapshot), codebook512)
    assert len(tokens) == 256
    assert tokens.patch_rows == tokens.patch_cols == 16


def test_encode_tiled_entry_maps_to_itself():
    rng = np.random.default_rng(9)
    entries = rng.integers(0, 256, size=(16, 4 * 4 * 3)).astype(float)
    codebook = Codebook(entries=entries, patch_size=4, seed=0)
    tile = entries[7].reshape(4, 4, 3).astype(np.uint8)
    pixels = np.tile(tile, (3, 2, 1))
    image = RgbFieldImage(pixels=pixels, meta=NormMeta(0, 1, 0, 1, 0, 1))
    tokens = encode(image, codebook)
    assert np.all(tokens.tokens == 7)


def test_encode_rejects_size_mismatch(tg256, codebook512):
    snap = synth.gen_uniform(40, 1.0, 0.0).snapshot  # 40 not divisible by 16
    with pytest.raises(ValueError):
        encode(to_rgb(snap), codebook512)


def test_encode_decode_idempotent(codebook512):
    rng = np.random.default_rng(13)
    for _ in range(5):
        snap = random_snapshot(rng, 64)
        image = to_rgb(snap)
        tokens = encode(image, codebook512)
        again = encode(decode(tokens, codebook512, meta=image.meta), codebook512)
        assert np.array_equal(tokens.tokens, again.tokens)


def test_decode_tiles_single_entry(codebook512):
    from fieldlang.codec import TokenSequence

    tokens = TokenSequence(tokens=np.full(4, 3), patch_rows=2, patch_cols=2)
    image = decode(tokens, codebook512)
    expected_tile = codebook512.entries[3].reshape(16, 16, 3)
    assert np.array_equal(image.pixels[:16, :16, :], expected_tile.astype(np.uint8))


def test_decode_rejects_out_of_range_token(codebook512):
    from fieldlang.codec import TokenSequence

    bad = TokenSequence(
        tokens=np.array([0, codebook512.entry_count, 0, 0]), patch_rows=2, patch_cols=2
    )
    with pytest.raises(ValueError):
        decode(bad, codebook512)


def test_compression_stats_reduction(tg256, codebook512):
    tokens = encode(to_rgb(tg256.snapshot), codebook512)
    stats = compression_stats(tg256.snapshot, tokens, codebook512)
    assert stats.token_count == 256
    assert stats.scalar_count == 3 * 256 * 256
    assert stats.reduction == pytest.approx(1.0 - 256 / 65536)
    assert round(stats.reduction * 100, 1) == 99.6


def test_compression_stats_constant_field_rmse_bounded(codebook512):
    snap = synth.gen_uniform(64, 2.0, -1.0).snapshot
    image = to_rgb(snap)
    tokens = encode(image, codebook512)
    stats = compression_stats(snap, tokens, codebook512)
    # Constant channels normalize to byte 0; reconstruction error comes only
    # from the quantizer residual in byte space.
    assert stats.rmse_u <= 1.0
    assert stats.rmse_p == 0.0


def test_codebook_file_round_trip(tmp_path, codebook512):
    path = tmp_path / "test.fcb"
    save_codebook(codebook512, path)
    loaded = load_codebook(path)
    assert loaded.entry_count == codebook512.entry_count
    assert loaded.patch_size == codebook512.patch_size
    assert loaded.seed == codebook512.seed
    assert np.array_equal(loaded.entries, codebook512.entries)
    again = tmp_path / "again.fcb"
    save_codebook(loaded, again)
    assert again.read_bytes() == path.read_bytes()


def test_codebook_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.fcb"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(CodebookFormatError):
        load_codebook(path)


def test_codebook_load_rejects_size_mismatch(tmp_path, codebook512):
    path = tmp_path / "short.fcb"
    save_codebook(codebook512, path)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(CodebookFormatError):
        load_codebook(path)


def test_png_round_trip(tmp_path, tg256):
    image = to_rgb(tg256.snapshot)
    path = tmp_path / "tg.png"
    save_png(image, path)
    assert (tmp_path / "tg.meta.json").exists()
    loaded = load_png(path)
    assert np.array_equal(loaded.pixels, image.pixels)
    assert loaded.meta == image.meta
