"""End-to-end command-line tests on a miniature scene.

The heavyweight path (gen -> pretrain -> train-grid -> train-style ->
stylize / stylize-3d / mix / eval) runs once at reduced sizes via a
module-scoped fixture; the individual tests assert on its artifacts.
"""

import filecmp
import os
import shutil

import pytest

from stylefield.checkpoint import BLOB_NAME, MANIFEST_NAME, Checkpoint
from stylefield.cli import main
from stylefield.config import RunConfig, save_config

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")

TINY_CONFIG = dict(
    seed=5, grid_resolution=12, grid_rank=2, basic_channels=12, samples_per_ray=12,
    encoder_channels=(4, 6, 8), dsi_spatial_depth=1, mlcd_stage_convs=1,
    stage0_iters=120, stage0_rays_per_batch=1024, stage1_iters=25, stage2_iters=25)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "run.cfg"
    save_config(RunConfig(**TINY_CONFIG), cfg_path)

    def run(*argv):
        return main([str(a) for a in argv])

    assert run("gen-toy-scene", "--out", root / "scene", "--scene", "three-spheres",
               "--views", "3", "--resolution", "16", "--config", cfg_path) == 0
    assert run("gen-toy-scene", "--out", root / "style_obj", "--scene", "style-sphere",
               "--views", "3", "--resolution", "16", "--config", cfg_path) == 0
    assert run("gen-toy-styles", "--out", root / "styles", "--count", "4",
               "--resolution", "16", "--config", cfg_path) == 0
    assert run("pretrain-scene", "--views", root / "scene", "--out", root / "stage0",
               "--config", cfg_path) == 0
    assert run("pretrain-scene", "--views", root / "style_obj",
               "--out", root / "style_field", "--config", cfg_path) == 0
    assert run("train-grid", "--views", root / "scene", "--scene", root / "stage0",
               "--out", root / "stage1", "--loss-csv", root / "stage1.csv",
               "--config", cfg_path) == 0
    assert run("train-style", "--views", root / "scene", "--checkpoint", root / "stage1",
               "--styles", root / "styles", "--out", root / "stage2",
               "--loss-csv", root / "stage2.csv", "--config", cfg_path) == 0
    return root, cfg_path, run


class TestPipelineCommands:
    def test_scene_artifacts(self, workdir):
        root, _, _ = workdir
        assert (root / "scene" / "cameras.txt").exists()
        assert (root / "scene" / "view_000.png").exists()
        assert (root / "scene" / "mask_000.png").exists()
        assert (root / "scene" / "scene.json").exists()

    def test_loss_csv_written(self, workdir):
        root, _, _ = workdir
        header = (root / "stage1.csv").read_text().splitlines()[0]
        assert header == "iteration,l_f,l_r,l_g,wall_clock"

    def test_stylize_single_view(self, workdir):
        root, cfg, run = workdir
        # 32x32 style against the 16x16 toy scene
        assert run("gen-toy-styles", "--out", root / "style32", "--count", "1",
                   "--resolution", "32", "--config", cfg) == 0
        assert run("stylize", "--checkpoint", root / "stage2", "--views", root / "scene",
                   "--style", root / "style32" / "style_000.png", "--view", "1",
                   "--out", root / "frames2d", "--config", cfg) == 0
        assert (root / "frames2d" / "frame_000.png").exists()

    def test_stylize_deterministic_across_runs(self, workdir):
        root, cfg, run = workdir
        for out in ("det_a", "det_b"):
            assert run("stylize", "--checkpoint", root / "stage2",
                       "--views", root / "scene",
                       "--style", root / "styles" / "style_000.png",
                       "--out", root / out, "--config", cfg) == 0
        assert filecmp.cmp(root / "det_a" / "frame_000.png",
                           root / "det_b" / "frame_000.png", shallow=False)

    def test_stylize_trajectory(self, workdir):
        root, cfg, run = workdir
        from stylefield.cameras import orbit_cameras, write_trajectory

        poses = [c.pose for c in orbit_cameras(2, 16, 16)]
        write_trajectory(poses, root / "traj.txt")
        assert run("stylize", "--checkpoint", root / "stage2", "--views", root / "scene",
                   "--style", root / "styles" / "style_001.png",
                   "--trajectory", root / "traj.txt",
                   "--out", root / "frames_traj", "--config", cfg) == 0
        assert (root / "frames_traj" / "frame_001.png").exists()

    def test_stylize_3d_path(self, workdir):
        root, cfg, run = workdir
        from stylefield.cameras import orbit_cameras, write_trajectory

        poses = [c.pose for c in orbit_cameras(3, 16, 16)]
        write_trajectory(poses, root / "traj3d.txt")
        for out in ("frames3d_a", "frames3d_b"):
            assert run("stylize-3d", "--checkpoint", root / "stage2",
                       "--views", root / "scene", "--style-views", root / "style_obj",
                       "--style-checkpoint", root / "style_field",
                       "--front-content", "0", "--front-style", "0",
                       "--trajectory", root / "traj3d.txt",
                       "--out", root / out, "--config", cfg) == 0
        for i in range(3):
            assert filecmp.cmp(root / "frames3d_a" / f"frame_{i:03d}.png",
                               root / "frames3d_b" / f"frame_{i:03d}.png", shallow=False)

    def test_mix_levels(self, workdir):
        root, cfg, run = workdir
        assert run("mix", "--checkpoint", root / "stage2", "--views", root / "scene",
                   "--low", root / "styles" / "style_000.png",
                   "--mid", root / "styles" / "style_001.png",
                   "--high", root / "styles" / "style_002.png",
                   "--out", root / "mixed.png", "--config", cfg) == 0
        assert (root / "mixed.png").exists()

    def test_eval_consistency(self, workdir, capsys):
        root, cfg, run = workdir
        assert run("eval", "--consistency-check", "--views", root / "scene",
                   "--checkpoint", root / "stage2",
                   "--style", root / "styles" / "style_000.png",
                   "--pose-a", "0", "--pose-b", "1", "--points", "16",
                   "--config", cfg) == 0
        assert "consistency ratio" in capsys.readouterr().out

    def test_eval_variant_table_lists_absent(self, workdir):
        root, cfg, run = workdir
        ckdir = root / "variants"
        ckdir.mkdir(exist_ok=True)
        shutil.copytree(root / "stage2", ckdir / "variant_multi_dsi",
                        dirs_exist_ok=True)
        assert run("eval", "--variant-table", root / "table.csv",
                   "--checkpoint-dir", ckdir, "--views", root / "scene",
                   "--styles", root / "styles", "--config", cfg) == 0
        table = (root / "table.csv").read_text().splitlines()
        assert table[0] == "variant,status,style_discrepancy,content_discrepancy"
        cells = {line.split(",")[0]: line.split(",")[1] for line in table[1:]}
        assert cells["multi_dsi"] == "ok"
        assert cells["single_adain"] == "absent"


class TestCheckpointBytes:
    def test_save_load_save_byte_identical(self, workdir, tmp_path):
        root, _, _ = workdir
        resaved = tmp_path / "resaved"
        Checkpoint.load(root / "stage2").save(resaved)
        for name in (MANIFEST_NAME, BLOB_NAME):
            assert filecmp.cmp(root / "stage2" / name, resaved / name, shallow=False)

    def test_stage_markers(self, workdir):
        root, _, _ = workdir
        assert Checkpoint.load(root / "stage0").stage == "stage0"
        assert Checkpoint.load(root / "stage1").stage == "stage1"
        assert Checkpoint.load(root / "stage2").stage == "stage2"


class TestUsageErrors:
    def test_unknown_config_key_exit_2(self, workdir, capsys):
        root, cfg, run = workdir
        code = run("gen-toy-styles", "--out", root / "x", "--set", "foo=1",
                   "--config", cfg)
        assert code == 2
        assert "foo" in capsys.readouterr().err

    def test_unknown_flag_exit_2(self, workdir):
        root, _, run = workdir
        assert run("gen-toy-styles", "--out", root / "x", "--frobnicate") == 2

    def test_unknown_subcommand_exit_2(self, workdir):
        _, _, run = workdir
        assert run("transmogrify") == 2

    def test_eval_needs_exactly_one_mode(self, workdir):
        root, cfg, run = workdir
        assert run("eval", "--views", root / "scene", "--config", cfg) == 2

    def test_missing_checkpoint_nonzero(self, workdir):
        root, cfg, run = workdir
        code = run("stylize", "--checkpoint", root / "missing",
                   "--views", root / "scene",
                   "--style", root / "styles" / "style_000.png",
                   "--out", root / "nope", "--config", cfg)
        assert code == 1
