import pytest

from main import main
from src.core.artifacts import read_csv
from tweedie_lab import EXIT_ERROR, EXIT_OK, EXIT_TOLERANCE

VE_GAUSSIAN = """
process.family=ve
process.sigma.kind=constant
process.sigma.c=1.0
prior.kind=gaussian
prior.mean=0.0
prior.std=1.0
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_config(directory, text):
    path = directory / 'run.cfg'
    path.write_text(text.strip() + '\n', encoding='utf-8')
    return str(path)


def run(directory, command, text, *extra):
    return main([command, '--config', write_config(directory, text), '--out', str(directory / 'out'), *extra])


class TestScoreCheck:

    def test_ve_gaussian_passes(self, workdir):
        text = VE_GAUSSIAN + 'check.t=0.5,1.0\ncheck.x=-1.0,0.0,1.5\n'
        assert run(workdir, 'score-check', text) == EXIT_OK
        frame = read_csv(workdir / 'out' / 'score_check.csv')
        assert list(frame.columns) == ['t', 'x', 'tweedie', 'oracle', 'abs_diff']
        assert len(frame) == 6
        assert frame['abs_diff'].max() < 1e-5
        meta = (workdir / 'out' / 'score_check.meta').read_text(encoding='utf-8')
        assert 'passed=true' in meta

    def test_wrong_index_exceeds_tolerance(self, workdir):
        text = """
process.family=besq
process.nu=0.5
model.family=besq
model.nu=1.5
prior.kind=point_mass
prior.value=1.0
check.t=0.5
check.x=1.0,2.0
"""
        assert run(workdir, 'score-check', text) == EXIT_TOLERANCE
        assert 'passed=false' in (workdir / 'out' / 'score_check.meta').read_text(encoding='utf-8')

    def test_malformed_value(self, workdir):
        text = VE_GAUSSIAN.replace('prior.std=1.0', 'prior.std=abc') + 'check.t=1.0\ncheck.x=0.0\n'
        assert run(workdir, 'score-check', text) == EXIT_ERROR

    def test_missing_key(self, workdir):
        assert run(workdir, 'score-check', VE_GAUSSIAN + 'check.t=1.0\n') == EXIT_ERROR
        assert not (workdir / 'out' / 'score_check.csv').exists()


class TestArguments:

    def test_missing_config_file(self, workdir):
        assert main(['generate', '--config', str(workdir / 'absent.cfg')]) == EXIT_ERROR

    def test_threads_must_be_positive(self, workdir):
        assert run(workdir, 'score-check', VE_GAUSSIAN, '--threads', '0') == EXIT_ERROR

    def test_negative_seed(self, workdir):
        text = VE_GAUSSIAN + 'check.t=1.0\ncheck.x=0.0\n'
        assert run(workdir, 'score-check', text, '--seed', '-1') == EXIT_ERROR

    def test_unknown_command(self, workdir):
        with pytest.raises(SystemExit):
            main(['train', '--config', 'run.cfg'])


class TestGenerate:

    def test_stationary_vp(self, workdir):
        text = """
process.family=vp
process.alpha.kind=constant
process.alpha.c=1.0
score.source=stationary
sample.paths=200
sample.steps=20
sample.keep_paths=true
"""
        assert run(workdir, 'generate', text, '--seed', '3') == EXIT_OK
        out = workdir / 'out'
        assert len(read_csv(out / 'samples.csv')) == 200
        summary = read_csv(out / 'summary.csv')
        assert list(summary.columns) == ['statistic', 'value']
        assert len(read_csv(out / 'paths.csv')) == 21 * 200
        meta = (out / 'generate.meta').read_text(encoding='utf-8')
        assert 'excluded=0' in meta
        assert 'seed=3' in meta

    def test_same_seed_same_output(self, workdir):
        text = VE_GAUSSIAN + 'score.source=analytic\nsample.paths=100\nsample.steps=10\n'
        assert run(workdir, 'generate', text, '--seed', '5') == EXIT_OK
        first = read_csv(workdir / 'out' / 'samples.csv')
        assert run(workdir, 'generate', text, '--seed', '5', '--threads', '3') == EXIT_OK
        second = read_csv(workdir / 'out' / 'samples.csv')
        assert first.equals(second)

    def test_unknown_preset(self, workdir):
        assert run(workdir, 'generate', 'preset=nonexistent\n') == EXIT_ERROR

    def test_unknown_score_source(self, workdir):
        assert run(workdir, 'generate', VE_GAUSSIAN + 'score.source=oracle\n') == EXIT_ERROR


class TestDsmFit:

    def test_ve_basis(self, workdir):
        text = VE_GAUSSIAN + 'dsm.n=2000\ndsm.t_slices=0.5,1.0\ndsm.basis=one,x\n'
        assert run(workdir, 'dsm-fit', text) == EXIT_OK
        frame = read_csv(workdir / 'out' / 'dsm_coefficients.csv')
        assert list(frame.columns) == ['t_slice', 'one', 'x', 'loss', 'condition']
        assert list(frame['t_slice']) == [0.5, 1.0]

    def test_basis_feeds_generate(self, workdir):
        fit = VE_GAUSSIAN + 'dsm.n=2000\ndsm.t_slices=0.25,0.5,1.0\ndsm.basis=x\n'
        assert run(workdir, 'dsm-fit', fit) == EXIT_OK
        coefficients = workdir / 'out' / 'dsm_coefficients.csv'
        generate = VE_GAUSSIAN + f'score.source=basis\nscore.file={coefficients}\nsample.paths=50\nsample.steps=10\n'
        assert run(workdir, 'generate', generate) == EXIT_OK
        assert 'score=basis-fit' in (workdir / 'out' / 'generate.meta').read_text(encoding='utf-8')


class TestEbRun:

    def test_besq(self, workdir):
        assert run(workdir, 'eb-run', 'eb.kind=besq\neb.n=2000\n') == EXIT_OK
        out = workdir / 'out'
        for name in ('eb_histogram.csv', 'eb_curve.csv', 'eb_estimates.csv', 'eb_run.meta'):
            assert (out / name).exists()
        text = (out / 'eb_estimates.csv').read_text(encoding='utf-8')
        header = [line for line in text.splitlines() if line.startswith('#')]
        assert header[0] == '# tweedie-lab run manifest'
        assert '# subcommand=eb-run' in header

    def test_compare(self, workdir):
        text = 'eb.kind=bm_log\neb.sigma=1.0\neb.n=2000\neb.compare=true\n'
        assert run(workdir, 'eb-run', text) == EXIT_OK
        frame = read_csv(workdir / 'out' / 'eb_compare.csv')
        assert list(frame['kind']) == ['gbm', 'bm_log']

    def test_sigma_required(self, workdir):
        assert run(workdir, 'eb-run', 'eb.kind=gbm\neb.n=2000\n') == EXIT_ERROR

    def test_unknown_kind(self, workdir):
        assert run(workdir, 'eb-run', 'eb.kind=poisson\n') == EXIT_ERROR
