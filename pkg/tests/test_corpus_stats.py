#!/usr/bin/env python3

import csv
import json
from datetime import date
from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from corpusforge.caption_extract import CaptionPair, Resolution
from corpusforge.corpus_stats import (CorpusStats, TokenizerMismatchError,
                                      aggregate, image_count_cdf,
                                      load_domain_themes, merge,
                                      registered_domain, size_bucket,
                                      theme_counts, write_stats, zero_stats)
from corpusforge.doc_assemble import (ImageFormat, ImageRef, ImageSegment,
                                      InterleavedDocument, TextSegment)
from corpusforge.lang_id import LanguageVerdict
from corpusforge.warc_ingest import InvalidUrlError


LANGUAGES = ['hi', 'bn', 'ta', 'hi', 'mr']
DOMAINS = ['a.example.in', 'b.example.in', 'c.example.in']


def _doc(i):
    n_images = 1 + i % 4
    segments = [TextSegment(' '.join(['शब्द'] * (5 + i)))]
    for k in range(n_images):
        segments.append(ImageSegment(ImageRef(
            'http://x.in/{}/{}.jpg'.format(i, k), '', '{}.jpg'.format(k),
            None, 150 + 37 * k + i, 200 + 11 * i, ImageFormat.JPG)))
    return InterleavedDocument(
        '{:032x}'.format(i), 'http://{}/{}'.format(DOMAINS[i % 3], i),
        DOMAINS[i % 3], date(2019 + i % 5, 1, 1),
        LanguageVerdict(LANGUAGES[i % 5], 0.9), segments)


def _pair(i):
    return CaptionPair('http://x.in/{}.jpg'.format(i), 'alt',
                       LanguageVerdict(['hi', 'en'][i % 2], 1.0),
                       [Resolution.Low, Resolution.Mid, Resolution.High,
                        None][i % 4], 5 + i % 3)


DOCS = [_doc(i) for i in range(50)]
PAIRS = [_pair(i) for i in range(20)]


def test_aggregate_counts():
    docs = DOCS[:4]
    stats = aggregate(docs, PAIRS[:4])

    assert stats.total_documents == 4
    assert stats.total_images == 1 + 2 + 3 + 4
    hi = stats.per_language['hi']
    assert (hi.documents, hi.tokens, hi.images) == (2, 13, 5)
    assert hi.avg_tokens_per_doc == 6.5
    assert hi.avg_images_per_doc == 2.5
    assert stats.image_count_histogram == {1: 1, 2: 1, 3: 1, 4: 1}
    assert stats.year_histogram == {2019: 1, 2020: 1, 2021: 1, 2022: 1}
    assert stats.domain_counts == {'a.example.in': 2, 'b.example.in': 1,
                                   'c.example.in': 1}
    assert stats.cap_per_language['hi'].pairs == 2
    assert stats.cap_per_language['en'].tokens == 6 + 5
    assert stats.cap_resolution_counts == {'Low': 1, 'Mid': 1, 'High': 1}
    assert stats.cap_resolution_shares == {'Low': 1 / 3, 'Mid': 1 / 3,
                                           'High': 1 / 3}


def test_registered_domain():
    assert registered_domain('https://hindi.news18.com/a/b') == \
        'hindi.news18.com'
    assert registered_domain('http://EXAMPLE.com:8080/') == 'example.com'
    with pytest.raises(InvalidUrlError):
        registered_domain('mailto:x@y')


def test_size_bucket():
    assert size_bucket(150, 200) == (128, 192)
    assert size_bucket(64, 63) == (64, 0)


def test_merge_laws():
    a = aggregate(DOCS[:10], PAIRS[:5])
    b = aggregate(DOCS[10:30], PAIRS[5:12])
    c = aggregate(DOCS[30:], PAIRS[12:])

    assert merge(merge(a, b), c) == merge(a, merge(b, c))
    assert merge(a, b) == merge(b, a)
    assert merge(a, zero_stats()) == a
    assert merge(zero_stats(), a) == a
    assert merge(merge(a, b), c) == aggregate(DOCS, PAIRS)
    # Inputs are not modified.
    assert a == aggregate(DOCS[:10], PAIRS[:5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=3), min_size=50,
                max_size=50),
       st.permutations(range(4)))
def test_merge_of_partitions_equals_whole(assignment, order):
    parts = [aggregate([d for d, k in zip(DOCS, assignment) if k == part])
             for part in range(4)]
    merged = reduce(merge, [parts[i] for i in order], zero_stats())
    assert merged == aggregate(DOCS)
    assert merged.to_dict() == aggregate(DOCS).to_dict()


def test_tokenizer_mismatch():
    with pytest.raises(TokenizerMismatchError):
        merge(zero_stats(), zero_stats('sentencepiece'))


def test_dict_round_trip():
    stats = aggregate(DOCS, PAIRS)
    data = json.loads(stats.to_json())
    assert data['schema_version'] == 1
    assert data['hash_algorithm'] == 'blake2b-128'
    assert list(data['year_histogram']) == ['2019', '2020', '2021', '2022',
                                            '2023']
    assert CorpusStats.from_dict(data) == stats


def test_zero_stats_dict():
    data = zero_stats().to_dict()
    assert data['per_language'] == {}
    assert data['cap_resolution_shares'] == {}
    assert image_count_cdf(zero_stats()) == []


def test_image_count_cdf():
    stats = aggregate(DOCS[:8])
    assert image_count_cdf(stats) == [(1, 2, 0.25), (2, 2, 0.5),
                                      (3, 2, 0.75), (4, 2, 1.0)]


def test_theme_counts(tmp_path):
    path = tmp_path / 'themes.txt'
    path.write_text('# themes\nA.example.in news\nb.example.in sports\n',
                    encoding='utf-8')
    themes = load_domain_themes(str(path))
    assert themes == {'a.example.in': 'news', 'b.example.in': 'sports'}
    assert theme_counts(aggregate(DOCS[:6]), themes) == \
        {'news': 2, 'sports': 2, 'unmapped': 2}

    path.write_text('only-a-host\n', encoding='utf-8')
    with pytest.raises(ValueError):
        load_domain_themes(str(path))


def _read_csv(path):
    with open(path, encoding='utf-8', newline='') as f:
        return list(csv.reader(f))


def test_write_stats(tmp_path):
    stats = aggregate(DOCS[:6], PAIRS[:4])
    write_stats(stats, str(tmp_path), themes={'a.example.in': 'news'})

    with open(str(tmp_path / 'stats.json'), encoding='utf-8') as f:
        data = json.load(f)
    assert data['theme_counts'] == {'news': 2, 'unmapped': 4}
    assert data['per_language']['hi']['documents'] == 3

    assert _read_csv(str(tmp_path / 'languages.csv'))[0] == \
        ['language', 'documents', 'tokens', 'images', 'avg_tokens_per_doc',
         'avg_images_per_doc']
    assert _read_csv(str(tmp_path / 'domains.csv'))[1:] == \
        [['a.example.in', '2', 'news'], ['b.example.in', '2', 'unmapped'],
         ['c.example.in', '2', 'unmapped']]
    assert _read_csv(str(tmp_path / 'image_count_cdf.csv'))[-1] == \
        ['4', '1', '1.0']
    for name in ('cap_languages.csv', 'years.csv', 'image_sizes.csv'):
        assert (tmp_path / name).exists()


def test_write_stats_without_tables(tmp_path):
    write_stats(zero_stats(), str(tmp_path), themes={}, csv_tables=False)
    assert sorted(p.name for p in tmp_path.iterdir()) == ['stats.json']
