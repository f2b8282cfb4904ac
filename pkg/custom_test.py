from pyIHS.booster import cover_learner, error_decomposition
from pyIHS.data.Sources import make_sphere_margin_source
from pyIHS.learner import compute_params, region_learner
from pyIHS.sampler import WalkConfig


def test_cover_smoke():
    """Learn a cover on a small hard-margin source and print its errors."""
    src = make_sphere_margin_source(n=3, k=2, rho=0.2, seed=0)
    params = compute_params(3, 2, 0.2, 0.1, m_minus=8, m_plus=2000)
    walk = WalkConfig.for_margin(src.n + 2, 0.2)

    def region_fn(source, seed):
        return region_learner(source, 0.1, 0.2, 0.05, 20, params, walk, seed=seed)

    result = cover_learner(src, region_fn, epsilon=0.1, gamma=0.05)
    print(result.tag, len(result.hypothesis.regions))
    print(error_decomposition(result.hypothesis, src.spawn(99), 10000))


if __name__ == '__main__':
    test_cover_smoke()
