import pytest

from daplace import cli
from daplace.exceptions import NewtonConvergenceError

SMALL = ['--set', 'm=5', '--set', 'n=3']


def test_coeffs(capsys):
    assert cli.main(['coeffs', '0.5', '0.125']) == cli.EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2
    assert out[0].startswith('eps=0.5:')


def test_invalid_penalty_parameter(capsys):
    assert cli.main(['coeffs', '0.7']) == cli.EXIT_INVALID
    assert 'invalid input' in capsys.readouterr().err


@pytest.mark.parametrize('override', ['m=1', 'm=abc', 'colour=red', 'm'])
def test_bad_override(override):
    assert cli.main(['forward', '--set', override]) == cli.EXIT_INVALID


def test_missing_config_file(tmp_path):
    assert cli.main(['forward', '-c', str(tmp_path / 'none.txt')]) == cli.EXIT_INVALID


def test_unknown_experiment_is_rejected_by_parser():
    with pytest.raises(SystemExit):
        cli.main(['experiment', '9'])


def test_forward_writes_snapshots(tmp_path, capsys):
    out = tmp_path / 'snapshots'
    assert cli.main(['forward'] + SMALL + ['--times', '0,1', '-o', str(out)]) == cli.EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ['state_t000.dat', 'state_t004.dat']
    lines = (out / 'state_t000.dat').read_text().splitlines()
    assert len(lines) == 25
    assert '2 snapshots' in capsys.readouterr().out


def test_forward_rejects_late_snapshot(tmp_path):
    assert cli.main(['forward'] + SMALL + ['--times', '2', '-o', str(tmp_path)]) == cli.EXIT_INVALID


def test_config_file_and_override(tmp_path):
    path = tmp_path / 'run.txt'
    path.write_text('m = 9\nn = 3\n')
    args = cli.build_parser().parse_args(['forward', '-c', str(path), '--set', 'm=5'])
    cfg = cli.resolve_config(args)
    assert (cfg.m, cfg.n) == (5, 3)


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def failing(*args, **kwargs):
        raise NewtonConvergenceError(2, 1.0)

    monkeypatch.setattr(cli, 'run_checks', failing)
    assert cli.main(['check-gradients']) == cli.EXIT_NUMERICAL
    assert 'numerical failure' in capsys.readouterr().err


def test_assimilate(capsys):
    assert cli.main(['assimilate'] + SMALL + ['--w', '1', '--sigma', '1']) == cli.EXIT_OK
    assert 'state error' in capsys.readouterr().out


def test_place(tmp_path, capsys):
    out = tmp_path / 'placement'
    argv = ['place'] + SMALL + ['--set', 'sweep_values=1.0', '--set', 'lower_tol=1e-8', '-o', str(out), '--plots']
    assert cli.main(argv) == cli.EXIT_OK
    assert (out / 'placement_performance.csv').is_file()
    assert (out / 'config.txt').is_file()
    assert (out / 'w_map_row00.png').is_file()
    assert 'status=ok' in capsys.readouterr().out
