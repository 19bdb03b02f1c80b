import random

import pytest

from tableqa.table_core import Column, Table

FIXTURE_CSV = """\
Mes de realización,Edad,Partido,Valoración
Enero,18,PP (Partido Popular),5
Enero,25,PSOE,7
Febrero,70,PP (Partido Popular),10 - Le votaría siempre
Enero,33,Sumar,3
,45,PP (Partido Popular),6
"""


@pytest.fixture
def survey_csv(tmp_path):
    path = tmp_path / "encuestas.csv"
    path.write_text(FIXTURE_CSV, encoding="utf-8")
    return str(path)


@pytest.fixture
def survey_table(survey_csv):
    from tableqa.table_core import load_csv
    return load_csv(survey_csv)


_CATEGORIES = ["Enero", "Febrero", "Marzo", "a", "b", "item", "iTem", "Otro",
               "x;y", "p, q", "uno|dos", "PP (Partido Popular)", ""]
_MIXED = ["5", "6", "1 - No le votaría nunca", "10 - Le votaría siempre", "+65"]


def random_cell(rng: random.Random):
    roll = rng.random()
    if roll < 0.15:
        return None
    if roll < 0.45:
        return float(rng.randint(-5, 20))
    if roll < 0.65:
        return rng.choice(_MIXED)
    return rng.choice(_CATEGORIES) or None


def random_table(rng: random.Random, max_rows: int = 20, max_cols: int = 5) -> Table:
    n_rows = rng.randint(0, max_rows)
    n_cols = rng.randint(1, max_cols)
    columns = []
    for c in range(n_cols):
        style = rng.random()
        cells = []
        for _ in range(n_rows):
            if style < 0.3:
                cells.append(None if rng.random() < 0.1 else float(rng.randint(0, 30)))
            elif style < 0.6:
                cells.append(random_cell(rng))
            else:
                v = rng.choice(_CATEGORIES)
                cells.append(v if v else None)
        columns.append(Column.from_cells(f"col{c}", cells))
    return Table("random", tuple(columns))
