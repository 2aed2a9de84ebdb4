"""Sphinx directive and role for :class:`pydispatch.Dispatcher` events

Protocol classes list their events in the docstring with ``.. event::``
and other pages link to them with ``:event:``.
"""
from sphinx.domains.python import PyFunction, PyXRefRole


class EventDirective(PyFunction):
    pass


def setup(app):
    app.add_directive_to_domain('py', 'event', EventDirective)
    app.add_role_to_domain('py', 'event', PyXRefRole())
    return {
        'version': '0.2',
        'parallel_read_safe': True,
        'parallel_write_safe': True,
    }
