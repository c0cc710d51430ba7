# License: MIT

'''
A small, immutable-by-convention HTML tree.

Pages are parsed with BeautifulSoup's html5lib builder, which applies the
HTML5 tree-construction rules (unclosed tags are closed, stray end tags are
dropped), and then copied into DomNode objects so that the pruning and
linearization code does not depend on bs4's object model.
'''

import html
import logging

from bs4 import BeautifulSoup
from bs4.element import (Comment, Declaration, Doctype, NavigableString,
                         ProcessingInstruction, Tag)

from corpusforge.io_util import decode_payload


logger = logging.getLogger(__name__)

TEXT_TAG = '#text'
COMMENT_TAG = '#comment'

VOID_TAGS = frozenset(['area', 'base', 'br', 'col', 'embed', 'hr', 'img',
                       'input', 'link', 'meta', 'source', 'track', 'wbr'])


class EmptyDocumentError(ValueError):
    pass


class DomNode(object):

    __slots__ = ('tag', 'attributes', 'children', 'text')

    def __init__(self, tag, attributes=None, children=None, text=''):
        self.tag = tag
        self.attributes = dict(attributes or {})
        self.children = list(children or [])
        self.text = text
        assert not (self.is_leaf() and self.children), \
            'text and comment nodes cannot have children'

    @classmethod
    def text_node(cls, text):
        return cls(TEXT_TAG, text=text)

    @classmethod
    def comment_node(cls, text):
        return cls(COMMENT_TAG, text=text)

    def is_text(self):
        return self.tag == TEXT_TAG

    def is_comment(self):
        return self.tag == COMMENT_TAG

    def is_leaf(self):
        return self.tag in (TEXT_TAG, COMMENT_TAG)

    def get(self, name, default=None):
        return self.attributes.get(name, default)

    def iter_nodes(self):
        '''
        Pre-order traversal, without recursion.
        '''
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __eq__(self, other):
        if not isinstance(other, DomNode):
            return NotImplemented
        # Iterative so that deep trees do not hit the recursion limit.
        pairs = [(self, other)]
        while pairs:
            a, b = pairs.pop()
            if a.tag != b.tag or a.text != b.text \
                    or a.attributes != b.attributes \
                    or len(a.children) != len(b.children):
                return False
            pairs.extend(zip(a.children, b.children))
        return True

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = None

    def __repr__(self):
        if self.is_leaf():
            return 'DomNode({!r}, text={!r})'.format(self.tag, self.text)
        return 'DomNode({!r}, {!r}, <{} children>)'.format(
            self.tag, self.attributes, len(self.children))


def _attribute_value(value):
    # bs4 returns multi-valued attributes such as class as lists.
    if isinstance(value, (list, tuple)):
        return ' '.join(value)
    return value


def _convert(tag):
    root = DomNode(tag.name.lower(),
                   {k.lower(): _attribute_value(v)
                    for k, v in tag.attrs.items()})
    stack = [(tag, root)]
    while stack:
        source, target = stack.pop()
        for child in source.children:
            if isinstance(child, Tag):
                node = DomNode(child.name.lower(),
                               {k.lower(): _attribute_value(v)
                                for k, v in child.attrs.items()})
                target.children.append(node)
                stack.append((child, node))
            elif isinstance(child, Comment):
                target.children.append(DomNode.comment_node(str(child)))
            elif isinstance(child, (Doctype, Declaration,
                                    ProcessingInstruction)):
                continue
            elif isinstance(child, NavigableString):
                target.children.append(DomNode.text_node(str(child)))
    return root


def parse_html(payload, charset_hint=None, doc_id=None):
    '''
    Parse a page into a DomNode tree rooted at "html".  `payload` may be
    bytes or already-decoded text.
    '''
    if isinstance(payload, bytes):
        text = decode_payload(payload, charset_hint, doc_id=doc_id)
    else:
        text = payload
    if not text.strip():
        raise EmptyDocumentError('empty document')

    soup = BeautifulSoup(text, 'html5lib')
    html_tag = soup.find('html', recursive=False)
    if html_tag is None:
        raise EmptyDocumentError('empty document')
    return _convert(html_tag)


def render_html(node):
    '''
    Serialize a tree back to HTML text.  Used to measure the size of a page
    after pruning.
    '''
    out = []
    stack = [(node, False)]
    while stack:
        current, closing = stack.pop()
        if closing:
            out.append('</{}>'.format(current.tag))
            continue
        if current.is_text():
            out.append(html.escape(current.text, quote=False))
            continue
        if current.is_comment():
            out.append('<!--{}-->'.format(current.text))
            continue
        attrs = ''.join(' {}="{}"'.format(name, html.escape(str(value)))
                        for name, value in current.attributes.items())
        out.append('<{}{}>'.format(current.tag, attrs))
        if current.tag in VOID_TAGS and not current.children:
            continue
        stack.append((current, True))
        stack.extend((child, False) for child in reversed(current.children))
    return ''.join(out)


def text_content(node):
    '''
    Concatenated text of all descendants; `br` contributes a newline.
    '''
    return ''.join('\n' if n.tag == 'br' else n.text
                   for n in node.iter_nodes() if n.is_text() or n.tag == 'br')
