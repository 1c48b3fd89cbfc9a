import numpy as np
import pytest

from catsafe.model import ExpressionMatrix, Response


@pytest.fixture
def six_array_matrix() -> ExpressionMatrix:
    values = np.array(
        [
            [1.0, 2.0, 3.0, 3.0, 4.0, 5.0],
            [2.0, 2.1, 1.9, 2.0, 2.2, 1.8],
            [5.0, 4.0, 6.0, 1.0, 2.0, 0.0],
            [0.5, 0.6, 0.4, 0.5, 0.7, 0.3],
        ]
    )
    return ExpressionMatrix(("g1", "g2", "g3", "g4"), tuple("abcdef"), values)


@pytest.fixture
def two_group_response() -> Response:
    return Response.two_group([1, 1, 1, 2, 2, 2])


def write_tsv(path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return str(path)
