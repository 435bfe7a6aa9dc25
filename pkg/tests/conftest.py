from datetime import date, timedelta

import pytest

from replaysim.corpus import CorpusStore

from helpers import article_record


@pytest.fixture
def toy_corpus():
    store = CorpusStore()
    start = date(2026, 1, 1)
    records = []
    n = 0
    for offset in range(10):
        day = start + timedelta(days=offset)
        for i in range(3):
            records.append(article_record(n, day))
            n += 1
    store.ingest(records)
    return store
