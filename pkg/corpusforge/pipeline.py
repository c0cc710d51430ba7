# License: MIT

'''
The batch pipeline: ingest -> refine -> lang-route -> assemble -> filter
-> fetch -> revalidate -> cap-extract -> stats.

Records of each input shard are cut into batches of `batch_size` HTML
records.  URL deduplication runs in the main process in batch order, so
its outcome does not depend on how many worker processes handle the later
stages.  Each batch keeps its intermediate files under
`<output>/work/<batch_id>/`; the stage groups are

  filter   (ingest .. filter)   filtered.jsonl, rejects.filter.jsonl,
                                counters.filter.json
  fetch    (fetch, revalidate)  il/<batch_id>.jsonl, rejects.fetch.jsonl,
                                counters.fetch.json
  cap      (cap-extract)        cap/<batch_id>.jsonl, counters.cap.json
  stats    (stats)              stats.json

and a group is complete when its counters file (or stats.json) exists.  A
rerun starts each batch at its first incomplete group, so an interrupted
run resumes without redoing finished work, and deleting any output makes
the next run rebuild it.  The top-level rejects.jsonl and stats.json are
rebuilt from the per-batch files in batch order.
'''

import glob
import json
import logging
import os
from collections import Counter, deque, namedtuple
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

from corpusforge.caption_extract import dedup_pairs, extract_pairs
from corpusforge.config import describe, load_blocklists, load_rules
from corpusforge.corpus_stats import (CorpusStats, aggregate, merge,
                                      write_stats, zero_stats)
from corpusforge.doc_assemble import (DocumentMeta, EmptyAssemblyError,
                                      HASH_ALGORITHM, linearize)
from corpusforge.doc_serialization import (parse_document, parse_pair,
                                           serialize_document,
                                           serialize_pair, serialize_reject)
from corpusforge.dom_refine import prune
from corpusforge.dom_tree import EmptyDocumentError, parse_html, \
    text_content
from corpusforge.filter_cascade import filter_document
from corpusforge.image_fetch import ImageFetcher, fetch_tasks, revalidate
from corpusforge.io_util import (atomic_write_text, dump_json, read_jsonl,
                                 write_jsonl)
from corpusforge.lang_id import load_classifier, route_document
from corpusforge.warc_ingest import CandidateUrlSet, WarcFormatError, \
    WarcReader, dedup_records


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

STAGES = ('ingest', 'refine', 'lang-route', 'assemble', 'filter', 'fetch',
          'revalidate', 'cap-extract', 'stats')
STAGE_GROUPS = (('filter', ('ingest', 'refine', 'lang-route', 'assemble',
                            'filter')),
                ('fetch', ('fetch', 'revalidate')),
                ('cap', ('cap-extract',)),
                ('stats', ('stats',)))
GROUP_NAMES = tuple(name for name, _ in STAGE_GROUPS)

BatchManifest = namedtuple('BatchManifest', ['batch_id', 'shards',
                                             'completed', 'counters',
                                             'status', 'error'])

EXIT_OK = 0
EXIT_FAILED_BATCHES = 1
EXIT_CONFIG_ERROR = 2


def manifest_to_dict(manifest):
    return {'batch_id': manifest.batch_id,
            'shards': list(manifest.shards),
            'completed': list(manifest.completed),
            'counters': manifest.counters,
            'status': manifest.status,
            'error': manifest.error}


def manifest_from_dict(data):
    return BatchManifest(data['batch_id'], tuple(data['shards']),
                         tuple(data['completed']), data['counters'],
                         data['status'], data.get('error'))


class BatchPaths(object):

    def __init__(self, output_dir, batch_id):
        self.batch_id = batch_id
        self.work_dir = os.path.join(output_dir, 'work', batch_id)
        self.filtered = os.path.join(self.work_dir, 'filtered.jsonl')
        self.il = os.path.join(output_dir, 'il', batch_id + '.jsonl')
        self.cap = os.path.join(output_dir, 'cap', batch_id + '.jsonl')
        self.stats = os.path.join(self.work_dir, 'stats.json')
        self.manifest = os.path.join(self.work_dir, 'manifest.json')

    def rejects(self, group):
        return os.path.join(self.work_dir, 'rejects.{}.jsonl'.format(group))

    def counters(self, group):
        return os.path.join(self.work_dir, 'counters.{}.json'.format(group))

    def outputs(self, group):
        '''
        Files a completed group leaves behind; the last one is written last.
        '''
        if group == 'filter':
            return [self.filtered, self.rejects('filter'),
                    self.counters('filter')]
        if group == 'fetch':
            return [self.il, self.rejects('fetch'), self.counters('fetch')]
        if group == 'cap':
            return [self.cap, self.counters('cap')]
        return [self.stats]

    def group_done(self, group):
        return all(os.path.exists(p) for p in self.outputs(group))

    def first_missing_group(self, until):
        for group in GROUP_NAMES[:GROUP_NAMES.index(until) + 1]:
            if not self.group_done(group):
                return group
        return None


def _read_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def _read_manifest(path):
    try:
        return manifest_from_dict(_read_json(path))
    except (OSError, ValueError, KeyError):
        return None


Resources = namedtuple('Resources', ['rules', 'blocklists', 'classifier'])


@lru_cache(maxsize=None)
def _load_resources(config_key):
    config = config_key._replace(list_overrides=dict(
        config_key.list_overrides))
    return Resources(load_rules(config), load_blocklists(config),
                     load_classifier(config.lid_model))


def batch_resources(config):
    '''
    Rules, blocklists and language classifier for `config`, loaded once per
    process.
    '''
    return _load_resources(config._replace(list_overrides=tuple(
        sorted(config.list_overrides.items()))))


def run_filter_group(records, config, resources):
    '''
    ingest .. filter for one batch.  `records` is a list of
    (WarcRecord, is_duplicate) pairs in stream order.  Returns (serialized
    accepted documents, reject lines, counters).
    '''
    rejects = Counter()
    drops = Counter()
    reject_lines = []
    accepted = []

    def add_reject(stage, reason, url, doc_id=None):
        rejects[reason] += 1
        reject_lines.append(serialize_reject(doc_id, stage, reason, url))

    for record, is_duplicate in records:
        url = record.target_url
        if is_duplicate:
            add_reject('ingest', 'Duplicate', url)
            continue
        try:
            tree = parse_html(record.payload, record.charset, doc_id=url)
        except EmptyDocumentError:
            add_reject('refine', 'EmptyDocument', url)
            continue
        pruned = prune(tree, resources.rules)
        text = text_content(pruned)
        if not text.strip():
            add_reject('refine', 'EmptyDocument', url)
            continue

        verdict, routed = route_document(text, resources.classifier,
                                         config.languages,
                                         config.lid_threshold)
        if not routed:
            logger.debug('language {} ({:.2f}) rejected, doc_id = {}'
                         .format(verdict.language, verdict.confidence, url))
            add_reject('lang-route', 'LanguageRejected', url)
            continue

        meta = DocumentMeta(url, record.capture_time.date(), verdict)
        try:
            doc = linearize(pruned, url, meta)
        except EmptyAssemblyError:
            add_reject('assemble', 'EmptyAfterAssembly', url)
            continue

        result = filter_document(doc, config.thresholds,
                                 resources.blocklists)
        drops.update(result.dropped)
        if not result.verdict.accepted:
            add_reject('filter', result.verdict.reason.value, url,
                       doc.doc_id)
            continue
        accepted.append(serialize_document(result.document))

    counters = {'html_records': len(records),
                'filtered_docs': len(accepted),
                'rejects': dict(sorted(rejects.items())),
                'segment_drops': dict(sorted(drops.items()))}
    return accepted, reject_lines, counters


def run_fetch_group(doc_lines, config, resources, progress=False):
    '''
    fetch + revalidate for one batch.
    '''
    docs = [parse_document(line) for line in doc_lines]
    rejects = Counter()
    drops = Counter()
    reject_lines = []
    kept = []

    if not config.fetch_enabled:
        counters = {'docs_out': len(docs), 'rejects': {},
                    'segment_drops': {}, 'fetch_tasks': 0, 'fetch_ok': 0}
        return doc_lines, [], counters

    tasks = [task for doc in docs for task in fetch_tasks(doc)]
    results = ImageFetcher(config.fetch).fetch_batch(tasks,
                                                     progress=progress)
    by_doc = {}
    for result in results:
        by_doc.setdefault(result.task.doc_id, []).append(result)

    for doc in docs:
        revalidated, verdict, dropped = revalidate(
            doc, by_doc.get(doc.doc_id, []), config.thresholds,
            resources.blocklists)
        drops.update(dropped)
        if revalidated is None:
            rejects[verdict.reason.value] += 1
            reject_lines.append(serialize_reject(
                doc.doc_id, 'revalidate', verdict.reason.value,
                doc.source_url))
            continue
        kept.append(serialize_document(revalidated))

    counters = {'docs_out': len(kept),
                'rejects': dict(sorted(rejects.items())),
                'segment_drops': dict(sorted(drops.items())),
                'fetch_tasks': len(results),
                'fetch_ok': sum(1 for r in results
                                if r.outcome.value == 'Ok')}
    return kept, reject_lines, counters


def run_cap_group(doc_lines, config, resources):
    pairs = []
    for line in doc_lines:
        pairs.extend(extract_pairs(parse_document(line), config.thresholds,
                                   resources.classifier))
    if config.cap_url_dedup:
        pairs = list(dedup_pairs(pairs))
    return [serialize_pair(p) for p in pairs], {'pairs': len(pairs)}


def _sum_counters(*counter_dicts):
    total = Counter()
    for counters in counter_dicts:
        total.update(counters)
    return dict(sorted(total.items()))


def build_manifest(paths, shards, ingest_counters, previous=None):
    '''
    Combine the per-group counter files into the batch manifest.
    '''
    completed = set(previous.completed) if previous else set()
    for group, stages in STAGE_GROUPS:
        if paths.group_done(group):
            completed.update(stages)

    counters = dict(ingest_counters)
    rejects = {}
    drops = {}
    if os.path.exists(paths.counters('filter')):
        filter_counters = _read_json(paths.counters('filter'))
        rejects = filter_counters['rejects']
        drops = filter_counters['segment_drops']
        counters['filtered_docs'] = filter_counters['filtered_docs']
    if os.path.exists(paths.counters('fetch')):
        fetch_counters = _read_json(paths.counters('fetch'))
        rejects = _sum_counters(rejects, fetch_counters['rejects'])
        drops = _sum_counters(drops, fetch_counters['segment_drops'])
        counters['docs_out'] = fetch_counters['docs_out']
        counters['fetch_tasks'] = fetch_counters['fetch_tasks']
        counters['fetch_ok'] = fetch_counters['fetch_ok']
        accounted = counters['docs_out'] + sum(rejects.values()) \
            + counters['non_html_skipped']
        assert accounted == counters['records_in'], \
            'batch {} does not reconcile: {} records in, {} accounted' \
            .format(paths.batch_id, counters['records_in'], accounted)
    if os.path.exists(paths.counters('cap')):
        counters['cap_pairs'] = _read_json(paths.counters('cap'))['pairs']
    counters['rejects'] = rejects
    counters['segment_drops'] = drops

    return BatchManifest(paths.batch_id, tuple(shards),
                         tuple(s for s in STAGES if s in completed),
                         counters, 'ok', None)


def _write_manifest(paths, manifest):
    atomic_write_text(paths.manifest,
                      dump_json(manifest_to_dict(manifest)) + '\n')


def process_batch(batch_id, shards, records, ingest_counters, config,
                  until='stats', progress=False):
    '''
    Run the incomplete stage groups of one batch, up to and including
    `until`.  Returns the batch manifest.
    '''
    paths = BatchPaths(config.output_dir, batch_id)
    resources = batch_resources(config)
    start = paths.first_missing_group(until)
    previous = _read_manifest(paths.manifest)
    if start is None:
        manifest = build_manifest(paths, shards, ingest_counters, previous)
        _write_manifest(paths, manifest)
        return manifest

    run = GROUP_NAMES[GROUP_NAMES.index(start):GROUP_NAMES.index(until) + 1]
    logger.info('batch {}: running {}'.format(batch_id, ', '.join(run)))

    if 'filter' in run:
        accepted, reject_lines, counters = run_filter_group(records, config,
                                                            resources)
        write_jsonl(paths.filtered, accepted)
        write_jsonl(paths.rejects('filter'), reject_lines)
        atomic_write_text(paths.counters('filter'), dump_json(counters))
        logger.info('batch {}: {} of {} HTML records passed the filters'
                    .format(batch_id, len(accepted), len(records)))

    if 'fetch' in run:
        kept, reject_lines, counters = run_fetch_group(
            list(read_jsonl(paths.filtered)), config, resources, progress)
        write_jsonl(paths.il, kept)
        write_jsonl(paths.rejects('fetch'), reject_lines)
        atomic_write_text(paths.counters('fetch'), dump_json(counters))
        if counters['fetch_tasks']:
            logger.info('batch {}: fetch success rate {:.3f}'.format(
                batch_id, counters['fetch_ok'] / counters['fetch_tasks']))

    if 'cap' in run:
        pair_lines, counters = run_cap_group(list(read_jsonl(paths.il)),
                                             config, resources)
        write_jsonl(paths.cap, pair_lines)
        atomic_write_text(paths.counters('cap'), dump_json(counters))

    if 'stats' in run:
        stats = aggregate((parse_document(line)
                           for line in read_jsonl(paths.il)),
                          (parse_pair(line) for line in read_jsonl(paths.cap)),
                          config.tokenizer)
        atomic_write_text(paths.stats, stats.to_json() + '\n')

    manifest = build_manifest(paths, shards, ingest_counters, previous)
    _write_manifest(paths, manifest)
    return manifest


def _process_batch_task(args):
    return process_batch(*args)


def expand_inputs(patterns):
    '''
    Expand the input globs; every shard appears once, in sorted order.
    '''
    shards = set()
    for pattern in patterns:
        matches = glob.glob(pattern)
        if not matches:
            logger.warning('input pattern {} matched nothing'.format(pattern))
        shards.update(matches)
    return sorted(shards)


def shard_stems(shards):
    '''
    Unique batch-id prefixes for the shards, from their file names.
    '''
    stems = []
    seen = Counter()
    for shard in shards:
        stem = os.path.basename(shard)
        for suffix in ('.gz', '.warc'):
            if stem.endswith(suffix):
                stem = stem[:-len(suffix)]
        seen[stem] += 1
        if seen[stem] > 1:
            stem = '{}-{}'.format(stem, seen[stem])
        stems.append(stem)
    return stems


def iter_record_batches(reader, batch_size):
    '''
    Yields (records, non_html_skipped, malformed_skipped) per batch.
    Records skipped between two batches are attributed to the earlier one.
    '''
    chunk = []
    base = (0, 0)
    for record in reader:
        if len(chunk) == batch_size:
            now = (reader.non_html_skipped, reader.malformed_skipped)
            yield chunk, now[0] - base[0], now[1] - base[1]
            base, chunk = now, []
        chunk.append(record)
    now = (reader.non_html_skipped, reader.malformed_skipped)
    if chunk or now != base:
        yield chunk, now[0] - base[0], now[1] - base[1]


def _mark_duplicates(chunk, url_set, content_hashes, content_dedup):
    duplicates = set()
    for _ in dedup_records(chunk, url_set, content_dedup, content_hashes,
                           on_duplicate=lambda r: duplicates.add(id(r))):
        pass
    return [(record, id(record) in duplicates) for record in chunk]


def _iter_batch_jobs(config, shards, failures, order):
    '''
    Yields (batch_id, shards, records, ingest_counters) in batch order,
    deduplicating URLs across the whole run.  Every batch id, failed ones
    included, is appended to `order` as it is reached.
    '''
    url_set = CandidateUrlSet(canonicalize=config.url_canonicalize)
    content_hashes = set()
    for shard, stem in zip(shards, shard_stems(shards)):
        index = 0
        try:
            with open(shard, 'rb') as archive:
                reader = WarcReader(archive, name=shard)
                for chunk, non_html, malformed in iter_record_batches(
                        reader, config.batch_size):
                    batch_id = '{}-{:05d}'.format(stem, index)
                    index += 1
                    records = _mark_duplicates(chunk, url_set,
                                               content_hashes,
                                               config.content_dedup)
                    ingest_counters = {
                        'records_in': len(chunk) + non_html,
                        'html_records': len(chunk),
                        'non_html_skipped': non_html,
                        'malformed_skipped': malformed,
                        'duplicates': sum(1 for _, d in records if d)}
                    order.append(batch_id)
                    yield batch_id, (shard,), records, ingest_counters
                logger.info('shard {}: {}'.format(shard, ', '.join(
                    '{}={}'.format(k, v)
                    for k, v in reader.counters().items())))
        except (OSError, WarcFormatError) as e:
            batch_id = '{}-{:05d}'.format(stem, index)
            logger.error('shard {} failed at batch {}: {}'
                         .format(shard, batch_id, e))
            order.append(batch_id)
            failures.append((batch_id, shard, str(e)))


def _batch_complete(config, batch_id, until):
    paths = BatchPaths(config.output_dir, batch_id)
    if paths.first_missing_group(until) is not None:
        return None
    manifest = _read_manifest(paths.manifest)
    if manifest is None or manifest.status != 'ok' \
            or not set(STAGE_GROUPS[GROUP_NAMES.index(until)][1]) \
            <= set(manifest.completed):
        return None
    return manifest


def _write_failed_manifest(config, batch_id, shard, error):
    paths = BatchPaths(config.output_dir, batch_id)
    previous = _read_manifest(paths.manifest)
    completed = previous.completed if previous else ()
    manifest = BatchManifest(batch_id, (shard,), completed, {}, 'failed',
                             error)
    _write_manifest(paths, manifest)
    return manifest


def _concat_files(paths, output_path):
    lines = []
    for path in paths:
        if os.path.exists(path):
            lines.extend(read_jsonl(path))
    write_jsonl(output_path, lines)


def finalize(config, batch_ids, until='stats', csv_tables=True):
    '''
    Rebuild rejects.jsonl, stats.json and the run manifest from the
    per-batch files, in batch order.
    '''
    output_dir = config.output_dir
    batch_paths = [BatchPaths(output_dir, b) for b in batch_ids]
    if config.audit_rejects:
        reject_files = []
        for paths in batch_paths:
            reject_files.extend([paths.rejects('filter'),
                                 paths.rejects('fetch')])
        _concat_files(reject_files, os.path.join(output_dir, 'rejects.jsonl'))

    stats = zero_stats(config.tokenizer)
    if until == 'stats':
        for paths in batch_paths:
            if os.path.exists(paths.stats):
                stats = merge(stats,
                              CorpusStats.from_dict(_read_json(paths.stats)))
        write_stats(stats, output_dir, csv_tables=csv_tables)
    return stats


def run_pipeline(config, until='stats', progress=False, csv_tables=True):
    '''
    Run (or resume) the pipeline.  Returns (exit status, manifests): 0 when
    every batch succeeded, 1 when some shard could not be read.
    '''
    if until not in GROUP_NAMES:
        raise ValueError('unknown stage group {}'.format(until))
    shards = expand_inputs(config.inputs)
    logger.info('{} input shards'.format(len(shards)))

    failures = []
    order = []
    manifests = {}
    jobs = _iter_batch_jobs(config, shards, failures, order)

    def handle(manifest):
        manifests[manifest.batch_id] = manifest
        logger.info('batch {} done: {}'.format(
            manifest.batch_id, dump_json(manifest.counters)))

    def skip_or_submit(job, submit):
        batch_id, shard_list, records, ingest_counters = job
        complete = _batch_complete(config, batch_id, until)
        if complete is not None:
            logger.info('batch {} already complete, skipping'
                        .format(batch_id))
            handle(complete)
            return
        submit(batch_id, shard_list, records, ingest_counters)

    if config.workers <= 1:
        for job in jobs:
            skip_or_submit(job, lambda *args: handle(process_batch(
                *args, config=config, until=until, progress=progress)))
    else:
        pending = deque()
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            def submit(batch_id, shard_list, records, ingest_counters):
                while len(pending) >= 2 * config.workers:
                    handle(pending.popleft().result())
                pending.append(executor.submit(
                    _process_batch_task,
                    (batch_id, shard_list, records, ingest_counters, config,
                     until, False)))
            for job in jobs:
                skip_or_submit(job, submit)
            while pending:
                handle(pending.popleft().result())

    for batch_id, shard, error in failures:
        manifests[batch_id] = _write_failed_manifest(config, batch_id, shard,
                                                     error)

    batch_ids = [b for b in order if manifests[b].status == 'ok']
    finalize(config, batch_ids, until, csv_tables)
    run_manifest = {
        'schema_version': SCHEMA_VERSION,
        'hash_algorithm': HASH_ALGORITHM,
        'tokenizer': config.tokenizer,
        'config': describe(config),
        'batches': [manifest_to_dict(manifests[b]) for b in order],
        'totals': _sum_counters(*(
            {k: v for k, v in m.counters.items() if isinstance(v, int)}
            for m in manifests.values())),
    }
    atomic_write_text(os.path.join(config.output_dir, 'manifest.json'),
                      dump_json(run_manifest) + '\n')

    status = EXIT_FAILED_BATCHES if failures else EXIT_OK
    logger.info('pipeline finished with status {}'.format(status))
    return status, [manifests[b] for b in order]
