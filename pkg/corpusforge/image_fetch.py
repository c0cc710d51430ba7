# License: MIT

'''
Bounded-parallelism image downloads.

At most `parallelism` requests are in flight (one per worker thread), and
at most `per_host` of them go to the same host.  Transient failures
(timeouts, 5xx) are retried by urllib3 with exponential backoff.  Results
come back in task order.  With a cache directory, every outcome is stored
under the SHA-1 of the URL so that reruns are reproducible offline.
'''

import enum
import hashlib
import io
import json
import logging
import os
import threading
from collections import Counter, namedtuple
from concurrent.futures import ThreadPoolExecutor
from urllib.parse import urlsplit

import requests
from PIL import Image
from requests.adapters import HTTPAdapter
from tqdm import tqdm
from urllib3.exceptions import (ConnectTimeoutError, MaxRetryError,
                                ReadTimeoutError)
from urllib3.util.retry import Retry

from corpusforge.doc_assemble import ImageFormat, ImageSegment
from corpusforge.filter_cascade import (Reason, filter_image_node, reject,
                                        ACCEPT)
from corpusforge.io_util import atomic_write_bytes, atomic_write_text


logger = logging.getLogger(__name__)

DEFAULT_PARALLELISM = 40
DEFAULT_PER_HOST = 4
DEFAULT_TIMEOUT_MS = 10000
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF_MS = 500
DEFAULT_MAX_BYTES = 20 * 1024 * 1024
DEFAULT_USER_AGENT = 'corpusforge/0.1 (+image fetcher)'
RETRY_STATUSES = (500, 502, 503, 504)
CHUNK_SIZE = 64 * 1024

_PIL_FORMATS = {'JPEG': ImageFormat.JPEG,
                'PNG': ImageFormat.PNG,
                'WEBP': ImageFormat.WEBP}


class DecodeError(ValueError):
    pass


class FetchOutcome(enum.Enum):
    Ok = 'Ok'
    HttpError = 'HttpError'
    Timeout = 'Timeout'
    DecodeError = 'DecodeError'
    TooLarge = 'TooLarge'


FetchTask = namedtuple('FetchTask', ['src_url', 'doc_id', 'segment_index'])
ImageMeta = namedtuple('ImageMeta', ['format', 'width_px', 'height_px'])
# status is the HTTP status for HttpError outcomes (None when no response
# was received at all).
FetchResult = namedtuple('FetchResult', ['task', 'outcome', 'status',
                                         'content', 'meta'])

FetchSettings = namedtuple('FetchSettings',
                           ['parallelism', 'per_host', 'timeout_ms',
                            'retries', 'backoff_ms', 'max_bytes',
                            'user_agent', 'cache_dir'],
                           defaults=(DEFAULT_PARALLELISM, DEFAULT_PER_HOST,
                                     DEFAULT_TIMEOUT_MS, DEFAULT_RETRIES,
                                     DEFAULT_BACKOFF_MS, DEFAULT_MAX_BYTES,
                                     DEFAULT_USER_AGENT, None))


def decode_meta(data):
    '''
    Identify the format and dimensions from the image header; pixel data
    is not decoded.
    '''
    if not data:
        raise DecodeError('no image data')
    try:
        with Image.open(io.BytesIO(data)) as image:
            pil_format = image.format
            width, height = image.size
    except Exception as e:
        raise DecodeError('cannot identify image: {}'.format(e)) from e
    image_format = _PIL_FORMATS.get(pil_format)
    if image_format is None:
        raise DecodeError('unsupported image format {}'.format(pil_format))
    if width < 1 or height < 1:
        raise DecodeError('bad image size {}x{}'.format(width, height))
    return ImageMeta(image_format, width, height)


def success_rate(results):
    '''
    Ok results / all results, or None for an empty batch.
    '''
    if not results:
        return None
    ok = sum(1 for r in results if r.outcome is FetchOutcome.Ok)
    return ok / len(results)


def _failure(task, outcome, status=None):
    return FetchResult(task, outcome, status, None, None)


def _is_timeout(exc):
    if isinstance(exc, requests.exceptions.Timeout):
        return True
    for arg in getattr(exc, 'args', ()):
        if isinstance(arg, MaxRetryError):
            arg = arg.reason
        if isinstance(arg, (ConnectTimeoutError, ReadTimeoutError)):
            return True
    return False


class FetchCache(object):
    '''
    One JSON record (and, for successes, the image bytes) per URL.
    '''

    def __init__(self, cache_dir):
        self.cache_dir = cache_dir
        os.makedirs(cache_dir, exist_ok=True)

    def _paths(self, url):
        key = hashlib.sha1(url.encode('utf-8')).hexdigest()
        base = os.path.join(self.cache_dir, key)
        return base + '.json', base + '.bin'

    def get(self, task):
        json_path, bin_path = self._paths(task.src_url)
        try:
            with open(json_path, encoding='utf-8') as f:
                entry = json.load(f)
            outcome = FetchOutcome(entry['outcome'])
            if outcome is not FetchOutcome.Ok:
                return _failure(task, outcome, entry.get('status'))
            with open(bin_path, 'rb') as f:
                content = f.read()
        except (OSError, ValueError, KeyError):
            return None
        try:
            return FetchResult(task, outcome, entry.get('status'), content,
                               decode_meta(content))
        except DecodeError:
            return _failure(task, FetchOutcome.DecodeError)

    def put(self, result):
        json_path, bin_path = self._paths(result.task.src_url)
        if result.outcome is FetchOutcome.Ok:
            atomic_write_bytes(bin_path, result.content)
        atomic_write_text(json_path, json.dumps(
            {'url': result.task.src_url, 'outcome': result.outcome.value,
             'status': result.status}))


class ImageFetcher(object):

    def __init__(self, settings=None):
        self.settings = settings or FetchSettings()
        if self.settings.parallelism < 1:
            raise ValueError('parallelism must be at least 1')
        self.cache = FetchCache(self.settings.cache_dir) \
            if self.settings.cache_dir else None
        self._local = threading.local()
        self._sessions = []
        self._host_slots = {}
        self._lock = threading.Lock()

    def _session(self):
        session = getattr(self._local, 'session', None)
        if session is None:
            settings = self.settings
            retry = Retry(total=settings.retries,
                          status_forcelist=RETRY_STATUSES,
                          backoff_factor=settings.backoff_ms / 1000.0,
                          allowed_methods=frozenset(['GET']),
                          raise_on_status=False,
                          respect_retry_after_header=False)
            adapter = HTTPAdapter(max_retries=retry, pool_maxsize=1)
            session = requests.Session()
            session.mount('http://', adapter)
            session.mount('https://', adapter)
            session.headers['User-Agent'] = settings.user_agent
            self._local.session = session
            with self._lock:
                self._sessions.append(session)
        return session

    def _host_slot(self, url):
        if not self.settings.per_host:
            return None
        host = urlsplit(url).hostname or ''
        with self._lock:
            slot = self._host_slots.get(host)
            if slot is None:
                slot = threading.BoundedSemaphore(self.settings.per_host)
                self._host_slots[host] = slot
            return slot

    def _download(self, task):
        settings = self.settings
        timeout = settings.timeout_ms / 1000.0
        try:
            with self._session().get(task.src_url, stream=True,
                                     timeout=timeout) as response:
                if not 200 <= response.status_code <= 299:
                    return _failure(task, FetchOutcome.HttpError,
                                    response.status_code)
                declared = response.headers.get('Content-Length')
                if declared and declared.isdigit() \
                        and int(declared) > settings.max_bytes:
                    return _failure(task, FetchOutcome.TooLarge,
                                    response.status_code)
                content = bytearray()
                for chunk in response.iter_content(CHUNK_SIZE):
                    content.extend(chunk)
                    if len(content) > settings.max_bytes:
                        return _failure(task, FetchOutcome.TooLarge,
                                        response.status_code)
                status = response.status_code
        except requests.exceptions.RequestException as e:
            if _is_timeout(e):
                return _failure(task, FetchOutcome.Timeout)
            logger.debug('request for {} failed: {}'.format(task.src_url, e))
            return _failure(task, FetchOutcome.HttpError)

        content = bytes(content)
        try:
            meta = decode_meta(content)
        except DecodeError as e:
            logger.debug('{}: {}'.format(task.src_url, e))
            return _failure(task, FetchOutcome.DecodeError, status)
        return FetchResult(task, FetchOutcome.Ok, status, content, meta)

    def fetch_one(self, task):
        if self.cache is not None:
            cached = self.cache.get(task)
            if cached is not None:
                return cached

        slot = self._host_slot(task.src_url)
        if slot is None:
            result = self._download(task)
        else:
            with slot:
                result = self._download(task)

        if self.cache is not None:
            self.cache.put(result)
        return result

    def fetch_batch(self, tasks, progress=False):
        tasks = list(tasks)
        if not tasks:
            return []
        workers = min(self.settings.parallelism, len(tasks))
        try:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                results = list(tqdm(executor.map(self.fetch_one, tasks),
                                    total=len(tasks), disable=not progress,
                                    desc='fetch', unit='img'))
        finally:
            with self._lock:
                for session in self._sessions:
                    session.close()
                self._sessions = []
            self._local = threading.local()

        outcomes = Counter(r.outcome.value for r in results)
        logger.info('fetched {} images, success rate {:.3f} ({})'
                    .format(len(results), success_rate(results),
                            ', '.join('{}={}'.format(k, v)
                                      for k, v in sorted(outcomes.items()))))
        return results


def fetch_batch(tasks, parallelism=DEFAULT_PARALLELISM,
                timeout_ms=DEFAULT_TIMEOUT_MS, max_retries=DEFAULT_RETRIES,
                progress=False, **settings):
    '''
    Download all tasks and return their FetchResults in task order.  Extra
    keyword arguments are FetchSettings fields (per_host, backoff_ms,
    max_bytes, user_agent, cache_dir).
    '''
    fetcher = ImageFetcher(FetchSettings(parallelism=parallelism,
                                         timeout_ms=timeout_ms,
                                         retries=max_retries, **settings))
    return fetcher.fetch_batch(tasks, progress=progress)


def fetch_tasks(doc):
    return [FetchTask(segment.image.src_url, doc.doc_id, i)
            for i, segment in enumerate(doc.segments)
            if isinstance(segment, ImageSegment)]


def revalidate(doc, results, th, bl):
    '''
    Apply fetched formats and sizes to the document's images, drop images
    that failed to download or now fail the image filter, and re-check the
    image-count bounds.  Returns (document or None, verdict, drop counts).
    '''
    by_index = {r.task.segment_index: r for r in results
                if r.task.doc_id == doc.doc_id}
    dropped = Counter()
    kept = []
    for i, segment in enumerate(doc.segments):
        if not isinstance(segment, ImageSegment):
            kept.append(segment)
            continue
        result = by_index.get(i)
        assert result is not None, \
            'no fetch result for segment {} of {}'.format(i, doc.doc_id)
        if result.outcome is not FetchOutcome.Ok:
            dropped['fetch_' + result.outcome.value] += 1
            continue
        image = segment.image._replace(width_px=result.meta.width_px,
                                       height_px=result.meta.height_px,
                                       format=result.meta.format)
        verdict = filter_image_node(image, th, bl)
        if not verdict.accepted:
            dropped[verdict.reason.value] += 1
            continue
        kept.append(ImageSegment(image))

    n_images = sum(1 for s in kept if isinstance(s, ImageSegment))
    if n_images < th.doc_min_images:
        return None, reject(Reason.NoImages), dropped
    if n_images > th.doc_max_images:
        return None, reject(Reason.TooManyImages), dropped
    return doc._replace(segments=kept), ACCEPT, dropped
