#!/usr/bin/env python3

import gzip
import io
import tracemalloc
from datetime import datetime, timezone

import pytest

from corpusforge.warc_ingest import (CandidateUrlSet, InvalidUrlError,
                                     WarcFormatError, WarcReader,
                                     canonicalize_url, dedup_records,
                                     iter_records, url_host)
from fixture_pages import (html_response, http_block, image_bytes, page,
                           para, warc_record, warcinfo_record, write_warc)


def _archive(records, compress=False):
    data = b''.join(gzip.compress(r) if compress else r for r in records)
    return io.BytesIO(data)


def _sample_records():
    return [warcinfo_record(),
            html_response('http://a.example.in/1', page(para('पहला पन्ना'))),
            warc_record('http://a.example.in/logo.jpg',
                        http_block(image_bytes(10, 10),
                                   content_type='image/jpeg')),
            html_response('http://a.example.in/2', page(para('दूसरा')),
                          status=404, reason='Not Found'),
            html_response('http://a.example.in/3', page(para('तीसरा')),
                          content_type='application/xhtml+xml'),
            warc_record('http://a.example.in/3', 'GET /3 HTTP/1.1\r\n\r\n',
                        warc_type='request')]


@pytest.mark.parametrize('compress', [False, True])
def test_reader_yields_html_responses(compress):
    reader = WarcReader(_archive(_sample_records(), compress))
    records = list(reader)

    assert [r.target_url for r in records] == ['http://a.example.in/1',
                                               'http://a.example.in/3']
    assert records[0].http_status == 200
    assert records[0].content_type == 'text/html'
    assert records[0].charset == 'utf-8'
    assert records[0].capture_time == datetime(2023, 3, 15, 8, 30,
                                               tzinfo=timezone.utc)
    assert 'पहला पन्ना'.encode('utf-8') in records[0].payload
    assert records[1].content_type == 'application/xhtml+xml'
    assert not records[0].truncated
    assert reader.counters() == {'records_read': 6, 'yielded': 2,
                                 'non_html_skipped': 4,
                                 'malformed_skipped': 0, 'resyncs': 0}


def test_truncated_flag():
    record = warc_record('http://a.example.in/big',
                         http_block(page(para('बड़ा पन्ना'))),
                         truncated=True)
    records = list(iter_records(_archive([record])))
    assert len(records) == 1
    assert records[0].truncated


@pytest.mark.parametrize('length_error', [10, -10])
def test_bad_content_length_is_skipped(length_error):
    good_1 = html_response('http://a.example.in/1', page(para('एक')))
    block = http_block(page(para('दो')))
    broken = warc_record('http://a.example.in/2', block,
                         content_length=len(block) + length_error)
    good_3 = html_response('http://a.example.in/3', page(para('तीन')))

    reader = WarcReader(_archive([good_1, broken, good_3]))
    urls = [r.target_url for r in reader]

    assert urls == ['http://a.example.in/1', 'http://a.example.in/3']
    assert reader.malformed_skipped == 1
    assert reader.records_read == 2


def test_corrupt_gzip_member_is_skipped():
    good_1 = gzip.compress(html_response('http://a.example.in/1',
                                         page(para('एक'))))
    # Valid gzip header, then a deflate block with a reserved block type.
    corrupt = b'\x1f\x8b\x08\x00\x00\x00\x00\x00\x00\xff' + b'\xff' * 32
    good_3 = gzip.compress(html_response('http://a.example.in/3',
                                         page(para('तीन'))))

    reader = WarcReader(io.BytesIO(good_1 + corrupt + good_3))
    urls = [r.target_url for r in reader]

    assert urls == ['http://a.example.in/1', 'http://a.example.in/3']
    assert reader.resyncs == 1


def test_not_a_warc():
    with pytest.raises(WarcFormatError):
        list(iter_records(io.BytesIO(b'<html><body>hello</body></html>')))


def test_empty_stream():
    reader = WarcReader(io.BytesIO(b''))
    assert list(reader) == []
    assert reader.counters() == {'records_read': 0, 'yielded': 0,
                                 'non_html_skipped': 0,
                                 'malformed_skipped': 0, 'resyncs': 0}


@pytest.mark.parametrize('url,expected', [
    ('HTTP://Example.COM:80/a/B?x=1#frag', 'http://example.com/a/B?x=1'),
    ('https://example.com:443/', 'https://example.com/'),
    ('https://example.com:8443/p', 'https://example.com:8443/p'),
    ('http://example.com/p?', 'http://example.com/p'),
    ('http://user:pw@Example.com/p', 'http://user:pw@example.com/p'),
    ('http://[::1]:8080/x', 'http://[::1]:8080/x'),
])
def test_canonicalize_url(url, expected):
    assert canonicalize_url(url) == expected
    assert canonicalize_url(expected) == expected


@pytest.mark.parametrize('url', ['not a url', '/relative/path',
                                 'http://example.com:99999/'])
def test_canonicalize_invalid(url):
    with pytest.raises(InvalidUrlError):
        canonicalize_url(url)


def test_url_host():
    assert url_host('https://User@News.Example.in:8080/x') == \
        'news.example.in'
    with pytest.raises(InvalidUrlError):
        url_host('mailto:someone')


def test_dedup_records():
    records = list(iter_records(_archive([
        html_response('http://a.example.in/x', page(para('एक'))),
        html_response('HTTP://A.example.in/x#top', page(para('दो'))),
        html_response('http://a.example.in/y', page(para('एक'))),
        html_response('http://a.example.in/z', page(para('तीन')))])))

    url_set = CandidateUrlSet()
    kept = [r.target_url for r in dedup_records(records, url_set)]
    assert kept == ['http://a.example.in/x', 'http://a.example.in/y',
                    'http://a.example.in/z']
    assert len(url_set) == 3
    assert 'http://A.EXAMPLE.in/x' in url_set

    dropped = []
    kept = [r.target_url for r in dedup_records(
        records, content_dedup=True, on_duplicate=dropped.append)]
    assert kept == ['http://a.example.in/x', 'http://a.example.in/z']
    assert [r.target_url for r in dropped] == ['HTTP://A.example.in/x#top',
                                               'http://a.example.in/y']


def test_exact_url_dedup():
    url_set = CandidateUrlSet(canonicalize=False)
    assert url_set.add('http://a.example.in/x')
    assert url_set.add('HTTP://a.example.in/x')
    assert not url_set.add('http://a.example.in/x')


def _peak_memory(path):
    tracemalloc.start()
    try:
        with open(path, 'rb') as f:
            url_set = CandidateUrlSet()
            n = sum(1 for _ in dedup_records(WarcReader(f), url_set))
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return n, peak


def test_streaming_memory_is_bounded(tmp_path):
    body = page(para('स्थिर स्मृति परीक्षण का पन्ना'))

    def records(n):
        for i in range(n):
            yield html_response('http://m.example.in/{}'.format(i), body)

    small = write_warc(str(tmp_path / 'small.warc.gz'), records(1000),
                       compress=True)
    large = write_warc(str(tmp_path / 'large.warc.gz'), records(50000),
                       compress=True)

    n_small, peak_small = _peak_memory(small)
    n_large, peak_large = _peak_memory(large)

    assert (n_small, n_large) == (1000, 50000)
    # The URL set grows with the input; everything else must not.
    url_set_allowance = 50000 * 200
    assert peak_large <= 3 * peak_small + url_set_allowance
