import numpy as np
import pytest

import hit


def test_shape_sampling_and_occupancy():
    shape = hit.generate_shape("table-4leg", seed=3)
    assert shape.family == "table-4leg"
    assert shape.part_count == 5
    pts, labels = shape.sample_surface(256, seed=1)
    assert pts.shape == (256, 3)
    assert labels.shape == (256,)
    assert set(labels.tolist()) <= set(range(5))
    assert np.all(np.abs(pts) <= 0.5)
    occ = shape.occupancy(np.zeros((1, 3)) + [0.0, 0.0, 0.45])
    assert occ.dtype == bool


def test_bad_family_raises():
    with pytest.raises(ValueError):
        hit.generate_shape("teapot")


def test_marching_cubes_sphere():
    res = 40
    ax = np.linspace(-0.55, 0.55, res)
    z, y, x = np.meshgrid(ax, ax, ax, indexing="ij")
    field = (np.sqrt(x * x + y * y + z * z) < 0.3).astype(float)
    verts, faces = hit.marching_cubes(field)
    assert faces.shape[1] == 3 and len(faces) > 0
    r = np.linalg.norm(verts, axis=1)
    assert np.max(np.abs(r - 0.3)) < 2 * 1.1 / (res - 1)


def test_chamfer_singletons():
    d = 0.37
    assert hit.chamfer(np.zeros((1, 3)), np.array([[0.0, 0.0, d]])) == pytest.approx(2 * d * d, abs=1e-15)


def test_segmentation_helpers():
    mean, per = hit.segmentation_iou([0, 1, 1, 1], [0, 0, 1, 1])
    assert per[0] == pytest.approx(0.5)
    assert mean == pytest.approx((0.5 + 2 / 3) / 2)
    assert hit.associate_labels([4, 4, 2], [0, 0, 1], 3) == [4, 2, -1]


def test_config_round_trip():
    cfg = hit.TrainConfig.desk()
    cfg.set("max_steps", "3")
    again = hit.TrainConfig.parse(cfg.text())
    assert again.max_steps == 3
    with pytest.raises(ValueError):
        cfg.set("warp_factor", "9")


def test_train_snapshot_export(tmp_path):
    cfg = hit.TrainConfig.parse(
        "max_steps = 3\nbatch_size = 2\nnum_shapes = 3\nparts_per_level = 2,3\n"
        "latent_dim = 8\nresolution = 4\nplanes = 6\nqueries_per_shape = 64\n"
        "points_per_shape = 64\nsurface_pool = 256\nvalidation_shapes = 1\n"
    )
    log, ckpt = hit.train(cfg, tmp_path / "run")
    ck = hit.load_checkpoint(ckpt)
    assert ck.step == 3
    pts, _ = hit.generate_shape("dumbbell", 1).sample_surface(128, 2)
    snap = ck.snapshot(pts)
    assert snap.level_count == 2
    assert snap.parts(2) == 3
    occ = snap.contained(2, pts)
    assert occ.shape == (3, 128)
    parent = snap.contained(1, pts)
    for child, p in enumerate(snap.parents(2)):
        assert np.all(occ[child] <= parent[p])
    meshes, tree, skipped = snap.export(tmp_path / "out", res=16)
    assert len(meshes) + skipped == 5
    back = hit.read_tree(tree)
    assert back.tree_text() == snap.tree_text()


def test_verify_oracle():
    ok, report = hit.verify("oracle")
    assert ok, report
