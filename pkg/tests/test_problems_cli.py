import io

import numpy as np
import pytest

from blocksolve.cli import main
from blocksolve.options import OptionsDB
from blocksolve.problems import (PoissonConfig, CavityConfig,
                                 ConvectionConfig, BenchConfig,
                                 run_poisson, run_cavity, run_convection,
                                 run_bench, poisson_mms, l2_error)

ROOT = __file__.rsplit("/tests/", 1)[0]


def _db(*tokens):
    return OptionsDB().parse_args(list(tokens))


class TestPoissonDriver:
    def test_default_solve(self):
        res = run_poisson(PoissonConfig(n=8), _db("-ksp_rtol", "1e-10"))
        assert res["report"].converged
        x = res["solution"]
        assert np.all(np.isfinite(x))
        assert x.max() > 0.05  # roughly the peak of the f=1 solution

    def test_mms_error_shrinks(self):
        errs = []
        for n in (4, 8):
            res = run_poisson(PoissonConfig(n=n, degree=2, mms=True),
                              _db("-ksp_rtol", "1e-12"))
            errs.append(res["l2_error"])
        assert errs[1] < errs[0] / 6.0  # ~cubic convergence for P2

    def test_matfree_matches_assembled(self):
        xs = []
        for mat in ("matfree", "aij"):
            res = run_poisson(PoissonConfig(n=6, degree=2),
                              _db("-mat_type", mat, "-ksp_rtol", "1e-12"))
            xs.append(res["solution"])
        assert np.allclose(xs[0], xs[1], atol=1e-9)

    def test_3d(self):
        res = run_poisson(PoissonConfig(n=3, dim=3, mms=True),
                          _db("-ksp_rtol", "1e-10"))
        assert res["report"].converged
        assert res["l2_error"] < 0.2


class TestNonlinearDrivers:
    def test_cavity(self):
        res = run_cavity(CavityConfig(n=4, re=50.0), _db())
        rep = res["report"]
        assert rep.converged
        assert rep.iterations <= 6

    def test_convection(self):
        res = run_convection(ConvectionConfig(n=4), _db())
        rep = res["report"]
        assert rep.converged
        assert rep.iterations <= 5
        W = res["space"]
        T = res["solution"][W.field_slice(2)]
        assert T.max() <= 1.0 + 1e-8 and T.min() >= -1e-8

    def test_snes_monitor(self):
        buf = io.StringIO()
        run_cavity(CavityConfig(n=4, re=10.0), _db("-snes_monitor"),
                   stdout=buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("0 SNES Function norm ")


class TestBench:
    def test_csv_shape(self):
        buf = io.StringIO()
        rows = run_bench(BenchConfig(n=4, degrees=(1, 2), repeats=1),
                         _db(), stdout=buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == ("problem,dim,degree,dofs,mode,dofs_per_sec,"
                            "bytes_per_dof,flops_per_apply")
        assert len(lines) == 1 + len(rows) == 5
        for row in rows:
            assert row["bytes_per_dof"] > 0
            assert row["flops_per_apply"] > 0


class TestCLI:
    def test_poisson_exit_code_and_summary(self, capsys):
        code = main(["poisson", "--n", "6", "--mms",
                     "--", "-ksp_rtol", "1e-10"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("poisson: dofs=")
        assert "l2_error=" in out

    def test_failure_exit_code(self, capsys):
        code = main(["poisson", "--n", "8",
                     "--", "-ksp_rtol", "1e-14", "-ksp_max_it", "2"])
        assert code == 1

    def test_unused_options_reported(self, capsys):
        main(["poisson", "--n", "4", "--", "-zzz_knob", "1"])
        assert "unused options" in capsys.readouterr().err

    def test_options_file(self, tmp_path, capsys):
        f = tmp_path / "o.opts"
        f.write_text("-ksp_type cg\n-pc_type jacobi\n-mat_type aij\n")
        code = main(["poisson", "--n", "6", "--options-file", str(f)])
        assert code == 0

    def test_ksp_view_to_stdout(self, capsys):
        main(["poisson", "--n", "4", "--", "-ksp_view", "-pc_type", "none"])
        out = capsys.readouterr().out
        assert "KSP (-) type: cg" in out
        assert "PC (-) type: none" in out

    def test_ksp_view_to_file(self, tmp_path):
        target = tmp_path / "view.txt"
        main(["poisson", "--n", "4", "--", "-ksp_view", str(target)])
        assert "KSP (-) type: cg" in target.read_text()

    def test_export_matrix_and_mesh(self, tmp_path, capsys):
        mfile = tmp_path / "A.mtx"
        mesh_file = tmp_path / "mesh.txt"
        code = main(["poisson", "--n", "2",
                     "--export-matrix", str(mfile),
                     "--export-mesh", str(mesh_file)])
        assert code == 0
        assert mfile.read_text().startswith("%%MatrixMarket")
        head = mesh_file.read_text().splitlines()[0]
        assert head.startswith("dim 2")

    def test_table_mode(self, capsys):
        code = main(["poisson", "--n", "4", "--degree", "1", "--table",
                     "--", "-ksp_rtol", "1e-12"])
        out = capsys.readouterr().out.strip().splitlines()
        assert code == 0
        assert out[0] == "n,dofs,l2_error,rate"
        assert len(out) == 4
        last_rate = float(out[-1].rsplit(",", 1)[1])
        assert 1.7 < last_rate < 2.3

    def test_navier_stokes_subcommand(self, capsys):
        code = main(["navier-stokes", "--n", "4", "--re", "10"])
        out = capsys.readouterr().out
        assert code == 0
        assert "navier-stokes: dofs=" in out
        assert "newton_its=" in out

    def test_rayleigh_benard_subcommand(self, capsys):
        code = main(["rayleigh-benard", "--n", "4"])
        out = capsys.readouterr().out
        assert code == 0
        assert "rayleigh-benard: dofs=" in out

    def test_bench_subcommand(self, capsys):
        code = main(["bench-matvec", "--n", "4", "--degrees", "1,2",
                     "--repeats", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("problem,dim,degree,dofs,mode,")

    def test_sor_to_schwarz_switch_same_driver(self):
        # identical driver invocation, solver swapped purely via options
        for cfg in ("configs/poisson-sor.opts", "configs/poisson-schwarz.opts"):
            buf = io.StringIO()
            code = main(["poisson", "--n", "8", "--degree", "3",
                         "--options-file", f"{ROOT}/{cfg}"], stdout=buf)
            assert code == 0, cfg
            assert buf.getvalue().startswith("poisson: dofs=")
