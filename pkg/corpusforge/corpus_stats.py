# License: MIT

'''
Corpus statistics: per-language document/token/image counts, domains,
images per document, crawl years, image sizes and caption-pair
resolutions.

CorpusStats only holds counts; averages and shares are derived from them
whenever they are read, so merging per-batch statistics gives exactly the
statistics of the combined batches.
'''

import csv
import logging
import os
from collections import Counter, namedtuple

import numpy as np

from corpusforge.doc_assemble import HASH_ALGORITHM, ImageSegment, \
    TextSegment
from corpusforge.io_util import atomic_write_text, data_path, dump_json, \
    read_list_file
from corpusforge.text_util import WHITESPACE_TOKENIZER
from corpusforge.warc_ingest import url_host


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SIZE_BUCKET_PX = 64
UNMAPPED_THEME = 'unmapped'
RESOLUTION_CLASSES = ('Low', 'Mid', 'High')

LanguageStats = namedtuple('LanguageStats', ['documents', 'tokens', 'images',
                                             'avg_tokens_per_doc',
                                             'avg_images_per_doc'])
CapLanguageStats = namedtuple('CapLanguageStats', ['pairs', 'tokens',
                                                   'avg_tokens'])


class TokenizerMismatchError(ValueError):
    pass


def token_count(text):
    return len(text.split())


def registered_domain(url):
    '''
    The full lowercased hostname, without port.  Raises InvalidUrlError for
    URLs without a host.
    '''
    return url_host(url)


def size_bucket(width_px, height_px):
    return (width_px // SIZE_BUCKET_PX * SIZE_BUCKET_PX,
            height_px // SIZE_BUCKET_PX * SIZE_BUCKET_PX)


def _ratio(numerator, denominator):
    return numerator / denominator if denominator else 0.0


class CorpusStats(object):

    COUNTER_FIELDS = ('documents', 'tokens', 'images', 'domain_counts',
                      'image_count_histogram', 'year_histogram',
                      'image_size_histogram', 'cap_pairs', 'cap_tokens',
                      'cap_resolution_counts')

    def __init__(self, tokenizer=WHITESPACE_TOKENIZER):
        self.tokenizer = tokenizer
        for name in self.COUNTER_FIELDS:
            setattr(self, name, Counter())

    def add_document(self, doc):
        language = doc.language.language
        n_tokens = sum(token_count(s.text) for s in doc.segments
                       if isinstance(s, TextSegment))
        images = [s.image for s in doc.segments
                  if isinstance(s, ImageSegment)]
        self.documents[language] += 1
        self.tokens[language] += n_tokens
        self.images[language] += len(images)
        self.domain_counts[registered_domain(doc.source_url)] += 1
        self.image_count_histogram[len(images)] += 1
        if doc.crawl_date is not None:
            self.year_histogram[doc.crawl_date.year] += 1
        for image in images:
            if image.width_px is not None and image.height_px is not None:
                self.image_size_histogram[
                    size_bucket(image.width_px, image.height_px)] += 1

    def add_pair(self, pair):
        language = pair.language.language
        self.cap_pairs[language] += 1
        self.cap_tokens[language] += pair.token_count
        if pair.resolution_class is not None:
            self.cap_resolution_counts[pair.resolution_class.value] += 1

    @property
    def per_language(self):
        return {language: LanguageStats(
                    documents=self.documents[language],
                    tokens=self.tokens[language],
                    images=self.images[language],
                    avg_tokens_per_doc=_ratio(self.tokens[language],
                                              self.documents[language]),
                    avg_images_per_doc=_ratio(self.images[language],
                                              self.documents[language]))
                for language in sorted(self.documents)}

    @property
    def cap_per_language(self):
        return {language: CapLanguageStats(
                    pairs=self.cap_pairs[language],
                    tokens=self.cap_tokens[language],
                    avg_tokens=_ratio(self.cap_tokens[language],
                                      self.cap_pairs[language]))
                for language in sorted(self.cap_pairs)}

    @property
    def cap_resolution_shares(self):
        total = sum(self.cap_resolution_counts.values())
        if not total:
            return {}
        return {name: self.cap_resolution_counts[name] / total
                for name in RESOLUTION_CLASSES}

    @property
    def total_documents(self):
        return sum(self.documents.values())

    @property
    def total_images(self):
        return sum(self.images.values())

    def copy(self):
        res = CorpusStats(self.tokenizer)
        for name in self.COUNTER_FIELDS:
            setattr(res, name, Counter(getattr(self, name)))
        return res

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'tokenizer': self.tokenizer,
            'hash_algorithm': HASH_ALGORITHM,
            'per_language': {language: dict(s._asdict()) for language, s
                             in self.per_language.items()},
            'domain_counts': {k: self.domain_counts[k]
                              for k in sorted(self.domain_counts)},
            'image_count_histogram': {
                str(k): self.image_count_histogram[k]
                for k in sorted(self.image_count_histogram)},
            'year_histogram': {str(k): self.year_histogram[k]
                               for k in sorted(self.year_histogram)},
            'image_size_histogram': {
                '{}x{}'.format(*k): self.image_size_histogram[k]
                for k in sorted(self.image_size_histogram)},
            'cap_per_language': {language: dict(s._asdict()) for language, s
                                 in self.cap_per_language.items()},
            'cap_resolution_counts': {
                name: self.cap_resolution_counts[name]
                for name in RESOLUTION_CLASSES
                if name in self.cap_resolution_counts},
            'cap_resolution_shares': self.cap_resolution_shares,
        }

    @classmethod
    def from_dict(cls, data):
        res = cls(data['tokenizer'])
        for language, s in data['per_language'].items():
            res.documents[language] = s['documents']
            res.tokens[language] = s['tokens']
            res.images[language] = s['images']
        res.domain_counts.update(data['domain_counts'])
        res.image_count_histogram.update(
            {int(k): v for k, v in data['image_count_histogram'].items()})
        res.year_histogram.update(
            {int(k): v for k, v in data['year_histogram'].items()})
        for key, count in data['image_size_histogram'].items():
            width, height = key.split('x')
            res.image_size_histogram[(int(width), int(height))] = count
        for language, s in data['cap_per_language'].items():
            res.cap_pairs[language] = s['pairs']
            res.cap_tokens[language] = s['tokens']
        res.cap_resolution_counts.update(data['cap_resolution_counts'])
        return res

    def to_json(self):
        return dump_json(self.to_dict())

    def __eq__(self, other):
        if not isinstance(other, CorpusStats):
            return NotImplemented
        return self.tokenizer == other.tokenizer and \
            all(+getattr(self, name) == +getattr(other, name)
                for name in self.COUNTER_FIELDS)

    __hash__ = None


def zero_stats(tokenizer=WHITESPACE_TOKENIZER):
    return CorpusStats(tokenizer)


def aggregate(docs, pairs=(), tokenizer=WHITESPACE_TOKENIZER):
    '''
    Single pass over accepted documents and caption pairs.
    '''
    stats = CorpusStats(tokenizer)
    for doc in docs:
        stats.add_document(doc)
    for pair in pairs:
        stats.add_pair(pair)
    return stats


def merge(a, b):
    if a.tokenizer != b.tokenizer:
        raise TokenizerMismatchError(
            'cannot merge statistics computed with tokenizers {} and {}'
            .format(a.tokenizer, b.tokenizer))
    res = a.copy()
    for name in CorpusStats.COUNTER_FIELDS:
        getattr(res, name).update(getattr(b, name))
    return res


def load_domain_themes(path=None):
    '''
    Read "hostname theme" lines.
    '''
    themes = {}
    for line in read_list_file(path or data_path('domain_themes.txt')):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError('bad domain theme line: {!r}'.format(line))
        themes[parts[0].lower()] = parts[1]
    return themes


def theme_counts(stats, themes):
    res = Counter()
    for domain, count in stats.domain_counts.items():
        res[themes.get(domain, UNMAPPED_THEME)] += count
    return res


def _write_csv(path, header, rows):
    output_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(output_dir, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def image_count_cdf(stats):
    '''
    Rows of (images per document, documents, cumulative share).
    '''
    counts = sorted(stats.image_count_histogram.items())
    if not counts:
        return []
    docs = np.array([c for _, c in counts], dtype=np.int64)
    cumulative = np.cumsum(docs) / docs.sum()
    return [(k, int(c), float(share))
            for (k, c), share in zip(counts, cumulative)]


def write_stats(stats, output_dir, themes=None, csv_tables=True):
    '''
    Write stats.json and, optionally, the CSV tables into `output_dir`.
    '''
    if themes is None:
        themes = load_domain_themes()
    data = stats.to_dict()
    by_theme = theme_counts(stats, themes)
    data['theme_counts'] = {k: by_theme[k] for k in sorted(by_theme)}
    atomic_write_text(os.path.join(output_dir, 'stats.json'),
                      dump_json(data) + '\n')
    if not csv_tables:
        return

    _write_csv(os.path.join(output_dir, 'languages.csv'),
               ('language',) + LanguageStats._fields,
               [(language,) + tuple(s)
                for language, s in stats.per_language.items()])
    _write_csv(os.path.join(output_dir, 'cap_languages.csv'),
               ('language',) + CapLanguageStats._fields,
               [(language,) + tuple(s)
                for language, s in stats.cap_per_language.items()])
    _write_csv(os.path.join(output_dir, 'image_count_cdf.csv'),
               ('images', 'documents', 'cumulative_share'),
               image_count_cdf(stats))
    _write_csv(os.path.join(output_dir, 'years.csv'),
               ('year', 'documents'), sorted(stats.year_histogram.items()))
    _write_csv(os.path.join(output_dir, 'domains.csv'),
               ('domain', 'documents', 'theme'),
               [(domain, count, themes.get(domain, UNMAPPED_THEME))
                for domain, count in sorted(
                    stats.domain_counts.items(),
                    key=lambda item: (-item[1], item[0]))])
    _write_csv(os.path.join(output_dir, 'image_sizes.csv'),
               ('width_bucket', 'height_bucket', 'images'),
               [(w, h, c) for (w, h), c
                in sorted(stats.image_size_histogram.items())])
