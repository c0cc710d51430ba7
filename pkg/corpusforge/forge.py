#!/usr/bin/env python3
# License: MIT

'''
Command-line entry point: `forge <command> [options]`.

`run`, `filter`, `fetch`, `cap` and `stats` drive (or resume) the batch
pipeline up to the named stage group.  `ingest`, `refine` and `warc-stats`
are inspection tools that read WARC files directly and print to stdout.
'''

import glob
import logging
import os
import sys

from corpusforge.caption_extract import dedup_pairs, extract_pairs
from corpusforge.config import ConfigError, load_config, load_rules
from corpusforge.corpus_stats import aggregate, write_stats
from corpusforge.doc_serialization import parse_document, parse_pair, \
    serialize_pair
from corpusforge.dom_refine import measure_reduction, prune
from corpusforge.dom_tree import EmptyDocumentError, parse_html, \
    text_content
from corpusforge.io_util import dump_json, read_jsonl
from corpusforge.lang_id import classify_document, load_classifier
from corpusforge.pipeline import EXIT_CONFIG_ERROR, EXIT_FAILED_BATCHES, \
    EXIT_OK, run_pipeline
from corpusforge.warc_ingest import CandidateUrlSet, WarcFormatError, \
    WarcReader, dedup_records


PIPELINE_COMMANDS = {'run': 'stats', 'filter': 'filter', 'fetch': 'fetch',
                     'cap': 'cap'}


def _add_config_arguments(parser):
    parser.add_argument('-c', '--config',
                        help='Pipeline config file.  Keys not given there' +
                        ' fall back to the shipped defaults.')
    parser.add_argument('-i', '--input', nargs='+', default=None,
                        help='WARC paths or glob patterns (overrides the' +
                        ' config file).')
    parser.add_argument('-o', '--output_dir', default=None,
                        help='Output directory (overrides the config file).')
    parser.add_argument('--rules', default=None,
                        help='Pruning rules file.')
    parser.add_argument('--strict-8', dest='strict_8', action='store_true',
                        default=None,
                        help='Require at least 8 words per paragraph.')
    parser.add_argument('--parallelism', type=int, default=None,
                        help='Concurrent image downloads.')
    parser.add_argument('--timeout-ms', dest='timeout_ms', type=int,
                        default=None, help='Per-image fetch timeout.')
    parser.add_argument('--retries', type=int, default=None,
                        help='Retries for transient fetch errors.')
    parser.add_argument('--cache-dir', dest='cache_dir', default=None,
                        help='Directory for cached image fetches.')
    parser.add_argument('--no-fetch', dest='fetch_enabled',
                        action='store_false', default=None,
                        help='Keep documents without fetching images.')
    parser.add_argument('--workers', type=int, default=None,
                        help='Worker processes for the per-batch stages.')
    parser.add_argument('--lid-model', dest='lid_model', default=None,
                        help='fastText language-identification model.')
    parser.add_argument('--no-csv', dest='csv_tables', action='store_false',
                        help='Only write stats.json, not the CSV tables.')


def _add_verbose_argument(parser):
    parser.add_argument('-v', '--verbose',
                        help='Print more status information. For every ' +
                        'additional time this flag is specified, ' +
                        'output gets more verbose.',
                        default=0, action='count')


def _config_from_args(args):
    overrides = {
        ('pipeline', 'input'): ' '.join(args.input) if args.input else None,
        ('pipeline', 'output_dir'): args.output_dir,
        ('pipeline', 'rules'): args.rules,
        ('pipeline', 'strict_8'): args.strict_8,
        ('pipeline', 'workers'): args.workers,
        ('pipeline', 'lid_model'): args.lid_model,
        ('fetch', 'parallelism'): args.parallelism,
        ('fetch', 'timeout_ms'): args.timeout_ms,
        ('fetch', 'retries'): args.retries,
        ('fetch', 'cache_dir'): args.cache_dir,
        ('fetch', 'enabled'): args.fetch_enabled,
    }
    return load_config(args.config, overrides=overrides)


def _iter_warc_paths(patterns):
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        if not matches:
            logging.warning('no files match {}'.format(pattern))
        for path in matches:
            yield path


def _open_readers(patterns):
    for path in _iter_warc_paths(patterns):
        logging.info('reading {}'.format(path))
        with open(path, 'rb') as f:
            reader = WarcReader(f, name=path)
            yield reader


def command_pipeline(args):
    config = _config_from_args(args)
    until = PIPELINE_COMMANDS[args.command]
    status, _ = run_pipeline(config, until=until, progress=args.verbose > 0,
                             csv_tables=args.csv_tables)
    return status


def command_cap(args):
    '''
    Without files, run the pipeline through the cap group; with files,
    extract pairs from those interleaved-document files to stdout.
    '''
    if not args.documents:
        return command_pipeline(args)
    config = _config_from_args(args)
    classifier = load_classifier(config.lid_model)

    def iter_pairs():
        for path in args.documents:
            for line in read_jsonl(path):
                for pair in extract_pairs(parse_document(line),
                                          config.thresholds, classifier):
                    yield pair

    pairs = iter_pairs()
    if args.dedup_urls or config.cap_url_dedup:
        pairs = dedup_pairs(pairs)
    for pair in pairs:
        print(serialize_pair(pair))
    return EXIT_OK


def command_stats(args):
    '''
    Recompute statistics from the interleaved documents and caption pairs
    already under the output directory.
    '''
    config = _config_from_args(args)
    il_paths = sorted(glob.glob(os.path.join(config.output_dir, 'il',
                                             '*.jsonl')))
    cap_paths = sorted(glob.glob(os.path.join(config.output_dir, 'cap',
                                              '*.jsonl')))
    docs = (parse_document(line) for path in il_paths
            for line in read_jsonl(path))
    pairs = (parse_pair(line) for path in cap_paths
             for line in read_jsonl(path))
    stats = aggregate(docs, pairs, tokenizer=config.tokenizer)
    write_stats(stats, config.output_dir, csv_tables=args.csv_tables)
    logging.info('{} documents, {} images'.format(stats.total_documents,
                                                  stats.total_images))
    return EXIT_OK


def command_ingest(args):
    url_set = CandidateUrlSet(canonicalize=not args.raw_urls)
    status = EXIT_OK
    try:
        for reader in _open_readers(args.warc_paths):
            for record in dedup_records(reader, url_set,
                                        content_dedup=args.content_dedup):
                print(dump_json({
                    'url': record.target_url,
                    'date': record.capture_time.isoformat(),
                    'status': record.http_status,
                    'content_type': record.content_type,
                    'charset': record.charset,
                    'truncated': record.truncated,
                    'bytes': len(record.payload)}))
    except (OSError, WarcFormatError) as e:
        logging.error('cannot read archive: {}'.format(e))
        status = EXIT_FAILED_BATCHES
    return status


def command_refine(args):
    rules = load_rules(_config_from_args(args))
    status = EXIT_OK
    try:
        for reader in _open_readers(args.warc_paths):
            for record in reader:
                try:
                    reduction = measure_reduction(record.payload, rules,
                                                  record.charset,
                                                  doc_id=record.target_url)
                except EmptyDocumentError:
                    logging.debug('empty document, doc_id = {}'
                                  .format(record.target_url))
                    continue
                reduction['url'] = record.target_url
                print(dump_json(reduction))
    except (OSError, WarcFormatError) as e:
        logging.error('cannot read archive: {}'.format(e))
        status = EXIT_FAILED_BATCHES
    return status


def command_warc_stats(args):
    totals = {}
    url_set = CandidateUrlSet()
    duplicates = 0
    rules = classifier = None
    if args.lid:
        config = _config_from_args(args)
        rules = load_rules(config)
        classifier = load_classifier(config.lid_model)
    status = EXIT_OK
    try:
        for reader in _open_readers(args.warc_paths):
            for record in reader:
                if not url_set.add(record.target_url):
                    duplicates += 1
                    continue
                if not args.lid:
                    continue
                try:
                    tree = prune(parse_html(record.payload, record.charset,
                                            doc_id=record.target_url), rules)
                except EmptyDocumentError:
                    continue
                text = text_content(tree)
                if text.strip():
                    url_set.record_language(
                        classify_document(text, classifier).language)
            for key, value in reader.counters().items():
                totals[key] = totals.get(key, 0) + value
    except (OSError, WarcFormatError) as e:
        logging.error('cannot read archive: {}'.format(e))
        status = EXIT_FAILED_BATCHES

    for key, value in totals.items():
        print('{}={}'.format(key, value))
    print('unique_urls={}'.format(len(url_set)))
    print('duplicate_urls={}'.format(duplicates))
    for language in sorted(url_set.per_language_counts):
        print('lang.{}={}'.format(language,
                                  url_set.per_language_counts[language]))
    return status


def build_parser():
    import argparse
    parser = argparse.ArgumentParser(
        prog='forge',
        description='Build interleaved image-text corpora from web archives.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subparsers = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (('run', 'Run every stage.'),
                            ('filter', 'Run ingest through filter.'),
                            ('fetch', 'Run through image fetching.')):
        sub = subparsers.add_parser(
            name, help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_config_arguments(sub)
        _add_verbose_argument(sub)
        sub.set_defaults(handler=command_pipeline)

    sub = subparsers.add_parser(
        'cap', help='Extract caption pairs.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub.add_argument('documents', nargs='*',
                     help='Interleaved-document files.  If none are given,' +
                     ' the pipeline runs through caption extraction.')
    sub.add_argument('--dedup-urls', dest='dedup_urls', action='store_true',
                     help='Keep one pair per image URL.')
    _add_config_arguments(sub)
    _add_verbose_argument(sub)
    sub.set_defaults(handler=command_cap)

    sub = subparsers.add_parser(
        'stats', help='Recompute statistics from the output directory.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_config_arguments(sub)
    _add_verbose_argument(sub)
    sub.set_defaults(handler=command_stats)

    sub = subparsers.add_parser(
        'ingest', help='Print the deduplicated HTML records of WARC files.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub.add_argument('warc_paths', nargs='+')
    sub.add_argument('--raw-urls', dest='raw_urls', action='store_true',
                     help='Deduplicate on exact URLs instead of canonical.')
    sub.add_argument('--content-dedup', dest='content_dedup',
                     action='store_true',
                     help='Also drop records with a repeated payload.')
    _add_verbose_argument(sub)
    sub.set_defaults(handler=command_ingest)

    sub = subparsers.add_parser(
        'refine', help='Print per-page pruning reduction.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub.add_argument('warc_paths', nargs='+')
    _add_config_arguments(sub)
    _add_verbose_argument(sub)
    sub.set_defaults(handler=command_refine)

    sub = subparsers.add_parser(
        'warc-stats', help='Print archive counters as key=value lines.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub.add_argument('warc_paths', nargs='+')
    sub.add_argument('--lid', action='store_true',
                     help='Also count unique pages per language.')
    _add_config_arguments(sub)
    _add_verbose_argument(sub)
    sub.set_defaults(handler=command_warc_stats)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    # Convert verbose flag to actually logging level.
    log_levels = [logging.WARNING, logging.INFO, logging.DEBUG]
    log_level = log_levels[min(args.verbose, 2)]
    # Make warnings from built-in warnings module get formatted more nicely.
    logging.captureWarnings(True)
    logging.basicConfig(format=('%(asctime)s - %(name)s - %(levelname)s - ' +
                                '%(message)s'), level=log_level)

    try:
        return args.handler(args)
    except ConfigError as e:
        logging.error('configuration error: {}'.format(e))
        return EXIT_CONFIG_ERROR


if __name__ == '__main__':
    sys.exit(main())
