import json
import os
import random
import shutil
from pathlib import Path

import pytest

THEMES = [
    ["rocket", "orbit", "planet", "telescope", "galaxy", "astronaut"],
    ["recipe", "oven", "flour", "butter", "garlic", "onion"],
    ["stock", "market", "dividend", "portfolio", "bond", "equity"],
]


def write_dumps(directory: Path, name: str, per_theme: int = 20, seed: int = 3) -> None:
    """Plain NDJSON RS_/RC_ pair: one comment per submission and one orphan."""
    rng = random.Random(seed)

    def text(theme, n):
        return " ".join(rng.choice(THEMES[theme]) for _ in range(n))

    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f"RS_{name}.json", "w") as subs, open(directory / f"RC_{name}.json", "w") as comments:
        for i in range(per_theme * len(THEMES)):
            theme = i % len(THEMES)
            subs.write(json.dumps({"id": f"s{i}", "title": text(theme, 6), "selftext": text(theme, 10),
                                   "created_utc": 1600000000 + i, "subreddit": name}) + "\n")
            comments.write(json.dumps({"id": f"c{i}", "link_id": f"t3_s{i}", "body": text(theme, 8),
                                       "created_utc": 1600000100 + i}) + "\n")
        comments.write(json.dumps({"id": "orphan", "link_id": "t3_gone", "body": "lost", "created_utc": 1}) + "\n")


def run_config():
    return {
        "datasets": [{"name": "demo", "dumps": "dumps"}],
        "lda": {"passes": 4},
        "embed": {"min_cluster_size": 8, "n_neighbors": 10},
        "selection": {"lda": {"grid": [2, 3, 4]}, "nmf": {"grid": [2, 3, 4]}, "embed": {"runs": 3}},
        "seed": 7,
    }


@pytest.fixture
def dumps(tmp_path):
    write_dumps(tmp_path / "dumps", "demo")
    return tmp_path / "dumps"


@pytest.fixture
def cli():
    path = os.environ.get("TOPICBENCH_CLI") or shutil.which("topicbench")
    if not path:
        pytest.skip("topicbench CLI not found")
    return path
