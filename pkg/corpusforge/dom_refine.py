# License: MIT

'''
Rule-based pruning of parsed pages.

Boilerplate subtrees (scripts, navigation, footers, adverts, ...) are
removed and formatting tags are unwrapped.  Whitespace in text nodes,
newlines included, collapses to single spaces; the only line breaks left
are childless `br` elements, with runs of them capped at two (a paragraph
separator).  Pruning is idempotent.
'''

import logging
import re
from collections import Counter
from functools import lru_cache

from corpusforge.dom_tree import DomNode, parse_html, render_html
from corpusforge.io_util import data_path, read_list_file


logger = logging.getLogger(__name__)

DEFAULT_MORE_LINK_CLASS = 'more-link'
DEFAULT_PLACEHOLDER = 'END_OF_DOCUMENT_TOKEN_TO_BE_REPLACED'
MAX_BREAKS = 2

_WHITESPACE_RUN = re.compile(r'\s+')


class PruneRules(object):

    SECTIONS = ('ALLOW', 'BLOCK', 'BLOCK_SUBSTRING', 'UNWRAP',
                'MORE_LINK_CLASS', 'PLACEHOLDER')

    def __init__(self, structural_allowlist, blocklist_tags,
                 blocklist_class_id_substrings, unwrap_tags,
                 more_link_class=DEFAULT_MORE_LINK_CLASS,
                 placeholder_token=DEFAULT_PLACEHOLDER):
        self.structural_allowlist = frozenset(
            t.lower() for t in structural_allowlist)
        self.blocklist_tags = frozenset(t.lower() for t in blocklist_tags)
        self.blocklist_class_id_substrings = frozenset(
            s.lower() for s in blocklist_class_id_substrings)
        self.unwrap_tags = frozenset(t.lower() for t in unwrap_tags)
        self.more_link_class = more_link_class.lower()
        self.placeholder_token = placeholder_token

        overlap = self.structural_allowlist & self.blocklist_tags
        if overlap:
            raise ValueError('tags both allowed and blocked: {}'
                             .format(', '.join(sorted(overlap))))
        if 'br' in self.unwrap_tags or 'br' in self.blocklist_tags:
            raise ValueError('br must be neither blocked nor unwrapped')

    @classmethod
    def load(cls, path=None):
        '''
        Read a rules file of "SECTION: value" lines.
        '''
        path = path or data_path('prune_rules.txt')
        sections = {name: [] for name in cls.SECTIONS}
        for line in read_list_file(path):
            section, sep, value = line.partition(':')
            section = section.strip().upper()
            value = value.strip()
            if not sep or section not in sections or not value:
                raise ValueError('bad rule line in {}: {!r}'
                                 .format(path, line))
            sections[section].append(value)

        more_link = sections['MORE_LINK_CLASS'] or [DEFAULT_MORE_LINK_CLASS]
        placeholder = sections['PLACEHOLDER'] or [DEFAULT_PLACEHOLDER]
        return cls(sections['ALLOW'], sections['BLOCK'],
                   sections['BLOCK_SUBSTRING'], sections['UNWRAP'],
                   more_link[-1], placeholder[-1])

    def is_more_link(self, node):
        return self.more_link_class in node.get('class', '').lower()

    def is_blocked(self, node):
        if node.tag in self.blocklist_tags:
            return True
        for attr in ('class', 'id'):
            value = node.get(attr, '').lower()
            if value and any(s in value
                             for s in self.blocklist_class_id_substrings):
                return True
        return False


@lru_cache(maxsize=None)
def default_rules():
    return PruneRules.load()


def is_line_break(node):
    return node.tag == 'br'


def _normalize_children(children):
    '''
    Collapse whitespace in text nodes, merge adjacent text nodes and cap
    runs of adjacent line breaks; empty text nodes are dropped.
    '''
    res = []
    breaks = 0
    for child in children:
        if child.is_text():
            text = _WHITESPACE_RUN.sub(' ', child.text)
            if not text:
                continue
            if res and res[-1].is_text():
                text = _WHITESPACE_RUN.sub(' ', res[-1].text + text)
                res[-1] = DomNode.text_node(text)
            else:
                res.append(DomNode.text_node(text))
            breaks = 0
        elif is_line_break(child):
            breaks += 1
            if breaks <= MAX_BREAKS:
                res.append(child)
        else:
            res.append(child)
            breaks = 0
    return res


def _prune_children(node, rules):
    '''
    Returns the list of nodes replacing `node` in its parent.
    '''
    if node.is_comment():
        return []
    if node.is_text():
        return [DomNode.text_node(node.text)]
    if rules.is_more_link(node):
        return [DomNode.text_node(rules.placeholder_token)]
    if rules.is_blocked(node):
        return []
    if node.tag == 'br':
        return [DomNode('br')]

    children = []
    for child in node.children:
        children.extend(_prune_children(child, rules))
    if node.tag in rules.unwrap_tags:
        return children
    return [DomNode(node.tag, node.attributes, _normalize_children(children))]


def prune(tree, rules=None):
    '''
    Returns a pruned copy of `tree`; the input is not modified.
    '''
    if rules is None:
        rules = default_rules()
    nodes = _prune_children(tree, rules)
    if len(nodes) == 1 and not nodes[0].is_leaf() \
            and not is_line_break(nodes[0]):
        return nodes[0]
    # The root itself was removed or unwrapped.
    return DomNode('html', {}, _normalize_children(nodes))


def essential_text(tree, rules=None):
    '''
    Text under structural (allowlisted) tags that is not inside a blocked
    or "read more" element.
    '''
    if rules is None:
        rules = default_rules()
    parts = []
    stack = [(tree, False)]
    while stack:
        node, allowed = stack.pop()
        if node.is_text():
            if allowed:
                parts.append(node.text)
            continue
        if node.is_comment() or rules.is_blocked(node) \
                or rules.is_more_link(node):
            continue
        allowed = allowed or node.tag in rules.structural_allowlist
        stack.extend((child, allowed) for child in reversed(node.children))
    return ''.join(parts)


def _char_counts(text):
    return Counter(ch for ch in text if not ch.isspace())


def reduction_stats(before_bytes, before_text, after_bytes, after_text):
    '''
    size_ratio = after_bytes / before_bytes; text_retention is the share of
    the original essential-text characters (whitespace ignored) that are
    still present afterwards.
    '''
    if before_bytes <= 0:
        raise ValueError('before size must be positive, got {}'
                         .format(before_bytes))
    before_counts = _char_counts(before_text)
    total = sum(before_counts.values())
    if total:
        retained = sum((before_counts & _char_counts(after_text)).values())
        text_retention = retained / total
    else:
        text_retention = 1.0
    return {'size_ratio': after_bytes / before_bytes,
            'text_retention': text_retention}


def measure_reduction(payload, rules=None, charset_hint=None, doc_id=None):
    '''
    Parse and prune one page and report how much smaller it became.
    '''
    if rules is None:
        rules = default_rules()
    tree = parse_html(payload, charset_hint, doc_id=doc_id)
    pruned = prune(tree, rules)
    before_bytes = len(payload) if isinstance(payload, bytes) \
        else len(payload.encode('utf-8'))
    after_bytes = len(render_html(pruned).encode('utf-8'))
    return reduction_stats(before_bytes, essential_text(tree, rules),
                           after_bytes, essential_text(pruned, rules))
