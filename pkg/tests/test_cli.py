import json
import os

import numpy as np
import pytest

from catsafe.cli import main
from catsafe.io import write_expression_matrix
from catsafe.sim import SyntheticDesign, randomize_response, synth_matrix


@pytest.fixture(scope="module")
def fixture_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    design = SyntheticDesign(m=40, n=12, n1=6, n2=6, blocks=((8, 0.4),) * 3)
    mat = synth_matrix(design, seed=11)
    write_expression_matrix(mat, root / "matrix.tsv")
    resp = randomize_response(12, seed=3)
    with open(root / "response.tsv", "w") as fh:
        for aid, lab in zip(mat.array_ids, resp.labels):
            fh.write(f"{aid}\t{lab}\n")
    with open(root / "survival.tsv", "w") as fh:
        rng = np.random.default_rng(5)
        for aid in mat.array_ids:
            fh.write(f"{aid}\t{rng.exponential(1.0) + 0.1:.4f}\t{rng.integers(0, 2)}\n")
    with open(root / "sets.gmt", "w") as fh:
        fh.write("SETA\tblock one\t" + "\t".join(mat.gene_ids[:8]) + "\n")
        fh.write("SETB\tspans blocks\t" + "\t".join(mat.gene_ids[5:14]) + "\n")
        fh.write("SETC\tscattered\t" + "\t".join(mat.gene_ids[::5]) + "\n")
    return root


def _test_args(root, out, method="array-perm", globl="wilcoxon", extra=()):
    return [
        "test",
        "--matrix", str(root / "matrix.tsv"),
        "--response", str(root / "response.tsv"),
        "--response-kind", "two-group",
        "--gmt", str(root / "sets.gmt"),
        "--local", "pooled-t",
        "--global", globl,
        "--method", method,
        "--B", "100",
        "--seed", "7",
        "--out", str(out),
        *extra,
    ]


def test_cmd_test_writes_report_and_manifest(fixture_files, tmp_path):
    rc = main(_test_args(fixture_files, tmp_path))
    assert rc == 0
    text = (tmp_path / "results.csv").read_text()
    assert text.startswith("#catsafe-report v1\n")
    lines = text.strip().splitlines()
    assert len(lines) == 2 + 3  # tag, header, three categories
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["seed"] == 7
    assert len(manifest["input_digests"]) == 3


def test_cmd_test_sorted_by_p(fixture_files, tmp_path):
    main(_test_args(fixture_files, tmp_path))
    lines = (tmp_path / "results.csv").read_text().strip().splitlines()[2:]
    ps = [float(line.split(",")[4]) for line in lines]
    assert ps == sorted(ps)


def test_determinism_across_thread_counts(fixture_files, tmp_path):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}"
        rc = main(_test_args(fixture_files, out, extra=("--threads", threads)))
        assert rc == 0
        outs.append((out / "results.csv").read_bytes())
    assert outs[0] == outs[1]


def test_determinism_repeat_same_seed(fixture_files, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        main(_test_args(fixture_files, out, method="boot-t", globl="avgdiff"))
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    ma = json.loads((a / "run_manifest.json").read_text())
    mb = json.loads((b / "run_manifest.json").read_text())
    ma.pop("timestamp")
    mb.pop("timestamp")
    ma.pop("command_line")
    mb.pop("command_line")
    assert ma == mb


def test_boot_with_fisher_is_validation_error(fixture_files, tmp_path, capsys):
    rc = main(_test_args(fixture_files, tmp_path, method="boot-t", globl="fisher",
                         extra=("--region", "upper:1.7")))
    assert rc == 2
    err = capsys.readouterr().err
    assert "null center" in err


def test_fisher_needs_region(fixture_files, tmp_path):
    rc = main(_test_args(fixture_files, tmp_path, method="class1", globl="fisher"))
    assert rc == 2


def test_gene_perm_and_class1_methods_run(fixture_files, tmp_path):
    for i, method in enumerate(("class1", "gene-perm")):
        rc = main(_test_args(fixture_files, tmp_path / str(i), method=method))
        assert rc == 0


def test_survival_workflow(fixture_files, tmp_path):
    rc = main([
        "test",
        "--matrix", str(fixture_files / "matrix.tsv"),
        "--response", str(fixture_files / "survival.tsv"),
        "--response-kind", "survival",
        "--gmt", str(fixture_files / "sets.gmt"),
        "--local", "cox-wald",
        "--global", "wilcoxon",
        "--method", "boot-t",
        "--B", "60",
        "--seed", "2",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "results.csv").read_text().strip().splitlines()
    assert len(lines) == 5


def test_bad_response_label_is_exit_2(fixture_files, tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    lines = (fixture_files / "response.tsv").read_text().splitlines()
    lines[0] = lines[0].rsplit("\t", 1)[0] + "\t9"
    bad.write_text("\n".join(lines) + "\n")
    rc = main([
        "test",
        "--matrix", str(fixture_files / "matrix.tsv"),
        "--response", str(bad),
        "--response-kind", "two-group",
        "--gmt", str(fixture_files / "sets.gmt"),
        "--local", "pooled-t", "--global", "wilcoxon", "--method", "class1",
        "--out", str(tmp_path),
    ])
    assert rc == 2
    assert "unknown label" in capsys.readouterr().err


def test_simulate_calibration_schema(tmp_path):
    rc = main([
        "simulate", "calibration",
        "--scenario", "class1",
        "--tests", "class1-wilcoxon,array-perm-wilcoxon",
        "--m", "100", "--n", "12", "--n-categories", "8",
        "--category-sizes", "5,10",
        "--nrep", "10", "--B", "30", "--seed", "1",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert lines[0] == "#catsafe-report v1"
    assert lines[1] == "test,alpha,n_pooled,realized,ratio"
    assert any(line.startswith("array-perm-wilcoxon,") for line in lines[2:])
    assert (tmp_path / "summary.json").exists()
    assert (tmp_path / "ecdf_class1-wilcoxon.csv").exists()


def test_simulate_with_config_file(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text(
        "config_version = 1\n"
        "# desk-scale smoke study\n"
        "scenario = class1\n"
        "tests = class1-avgdiff\n"
        "m = 80\nn = 10\nn-categories = 6\ncategory-sizes = 5\n"
        "nrep = 5\nB = 20\nseed = 2\n"
    )
    rc = main(["simulate", "calibration", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 0
    report = (tmp_path / "report.csv").read_text()
    assert "class1-avgdiff" in report


def test_simulate_power_schema(tmp_path):
    rc = main([
        "simulate", "power",
        "--tests", "array-perm-wilcoxon,boot-t-wilcoxon",
        "--m", "90", "--n", "12", "--n-categories", "4", "--category-sizes", "6",
        "--grid", "0,1", "--nrep", "8", "--B", "30", "--seed", "3",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert lines[1] == "test,c,power,mc_se"
    assert len(lines) == 2 + 4


def test_simulate_corrmap_schema(tmp_path):
    rc = main([
        "simulate", "corr-map",
        "--designs", "log-fold",
        "--rho-grid", "0,0.5",
        "--n-sim", "40", "--n-pairs", "20",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert lines[1].startswith("design,rho_x,median_rho_t")
    assert len(lines) == 4


def test_analytic_bvn_output(capsys):
    rc = main(["analytic", "bvn", "--x", "0", "--y", "0", "--rho", "0.5"])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "0.3333333333"


def test_analytic_lemma_output(capsys):
    rc = main(["analytic", "lemma-b2", "--rho", "0.5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "maximum at (0, 0)" in out
    assert "0.0833333333" in out


def test_analytic_theorem2_check(capsys):
    rc = main(["analytic", "theorem2-check"])
    assert rc == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_analytic_var_inflation(capsys):
    rc = main(["analytic", "var-inflation", "--m-c", "2", "--m-cbar", "998",
               "--rho-c", "0.5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "exact_factor=1.499" in out
    assert "approx_factor=1.5" in out


def test_analytic_wilcoxon_var(capsys):
    rc = main(["analytic", "wilcoxon-var", "--m", "4", "--m-c", "2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "var=1.666666667" in out
    assert "var_iid=1.666666667" in out


def test_threads_env_fallback(fixture_files, tmp_path, monkeypatch):
    monkeypatch.setenv("CATSAFE_THREADS", "2")
    rc = main(_test_args(fixture_files, tmp_path))
    assert rc == 0


def test_default_b_per_method(fixture_files, tmp_path):
    rc = main([
        "test",
        "--matrix", str(fixture_files / "matrix.tsv"),
        "--response", str(fixture_files / "response.tsv"),
        "--response-kind", "two-group",
        "--gmt", str(fixture_files / "sets.gmt"),
        "--local", "pooled-t", "--global", "wilcoxon", "--method", "boot-t",
        "--seed", "1", "--out", str(tmp_path),
    ])
    assert rc == 0
    line = (tmp_path / "results.csv").read_text().strip().splitlines()[2]
    assert line.split(",")[8] == "200"  # boot-t defaults to 200 resamples


def test_boot_q_needs_enough_resamples(fixture_files, tmp_path, capsys):
    rc = main(_test_args(fixture_files, tmp_path, method="boot-q",
                         extra=("--alpha", "0.001")))
    assert rc == 2  # B=100 < 1/alpha
    assert "needs B >=" in capsys.readouterr().err


def test_array_perm_pvalues_respect_resolution_floor(fixture_files, tmp_path):
    rc = main(_test_args(fixture_files, tmp_path, extra=("--B", "1000")))
    assert rc == 0
    lines = (tmp_path / "results.csv").read_text().strip().splitlines()[2:]
    ps = [float(line.split(",")[4]) for line in lines]
    # with B = 1000 the smallest representable p is 1/1001 ~ 0.001
    assert all(p >= 1.0 / 1001.0 for p in ps)


def test_simulate_real_data_mode(fixture_files, tmp_path):
    rc = main([
        "simulate", "calibration",
        "--scenario", "class1",
        "--tests", "class1-wilcoxon",
        "--matrix", str(fixture_files / "matrix.tsv"),
        "--gmt", str(fixture_files / "sets.gmt"),
        "--min-size", "3",
        "--nrep", "6", "--B", "20", "--seed", "4",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    assert "class1-wilcoxon" in (tmp_path / "report.csv").read_text()


def test_multi_group_anova_workflow(fixture_files, tmp_path):
    resp = tmp_path / "groups.tsv"
    mat_ids = [f"a{j:04d}" for j in range(12)]
    labels = [1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]
    resp.write_text("".join(f"{a}\t{g}\n" for a, g in zip(mat_ids, labels)))
    rc = main([
        "test",
        "--matrix", str(fixture_files / "matrix.tsv"),
        "--response", str(resp),
        "--response-kind", "multi-group",
        "--gmt", str(fixture_files / "sets.gmt"),
        "--local", "anova-f",
        "--global", "wilcoxon",
        "--method", "array-perm",
        "--B", "80", "--seed", "6",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    lines = (tmp_path / "results.csv").read_text().strip().splitlines()
    assert len(lines) == 5
