# License: MIT

import codecs
import json
import logging
import os
import tempfile

import cchardet


logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


def decode_payload(payload, charset_hint=None, doc_id=None):
    '''
    Decode a web payload to text.

    The declared charset is tried first, then strict UTF-8, then whatever
    cchardet detects with reasonable confidence.  If all of those fail, the
    bytes are decoded as UTF-8 with replacement characters so that a
    misdeclared page never stops the stream.
    '''
    if charset_hint:
        try:
            codecs.lookup(charset_hint)
            return payload.decode(charset_hint)
        except (LookupError, UnicodeDecodeError):
            logger.debug('declared charset {} failed, doc_id = {}'
                         .format(charset_hint, doc_id))

    try:
        return payload.decode('utf-8')
    except UnicodeDecodeError:
        pass

    chardet_output = cchardet.detect(payload)
    encoding = chardet_output['encoding']
    encoding_confidence = chardet_output['confidence']
    if encoding and encoding_confidence and encoding_confidence >= 0.5:
        logger.debug('decoding {} as {} with {} confidence'
                     .format(doc_id, encoding, encoding_confidence))
        try:
            return payload.decode(encoding)
        except (LookupError, UnicodeDecodeError):
            pass

    return payload.decode('utf-8', errors='replace')


def read_text_file(input_path):
    '''
    Read a text file, detecting the encoding if it is not UTF-8.
    '''
    with open(input_path, 'rb') as input_file:
        return decode_payload(input_file.read(), doc_id=input_path)


def read_list_file(input_path):
    '''
    Read a line-oriented data file.  Blank lines and lines starting with
    "#" are ignored; surrounding whitespace is stripped.
    '''
    res = []
    for line in read_text_file(input_path).splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        res.append(line)
    return res


def data_path(*parts, data_dir=None):
    return os.path.join(data_dir or DATA_DIR, *parts)


def atomic_write_text(output_path, text):
    '''
    Write `text` to a temporary file in the destination directory and
    rename it into place, so readers never see a partial file.
    '''
    output_dir = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(output_dir, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=output_dir, prefix='.tmp-')
    try:
        with open(fd, 'w', encoding='utf-8', newline='\n') as tmp_file:
            tmp_file.write(text)
        os.replace(tmp_path, output_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_bytes(output_path, data):
    output_dir = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(output_dir, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=output_dir, prefix='.tmp-')
    try:
        with open(fd, 'wb') as tmp_file:
            tmp_file.write(data)
        os.replace(tmp_path, output_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def dump_json(obj):
    '''
    The one JSON encoding used for every artifact: UTF-8 text, compact
    separators, no ASCII escaping.
    '''
    return json.dumps(obj, ensure_ascii=False, separators=(',', ':'))


def write_jsonl(output_path, lines):
    atomic_write_text(output_path, ''.join(line + '\n' for line in lines))


def read_jsonl(input_path):
    with open(input_path, encoding='utf-8') as input_file:
        for line in input_file:
            line = line.rstrip('\n')
            if line:
                yield line
