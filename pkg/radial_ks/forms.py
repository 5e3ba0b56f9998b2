"""
Validation of JSON run and sweep configurations.

Each JSON object is bound to a Django form; optional fields that are left
out take their defaults from settings.RADIAL_KS, and the cleaned values are
handed back as the frozen dataclasses the simulator works with.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from .driver import SweepSpec
from .dynamics import SimConfig
from .initial_data import FAMILIES, InitialDataSpec, initial_data_from_dict

logger = logging.getLogger(__name__)


def validate_positive(value):
    if value is not None and not value > 0:
        raise ValidationError(f'must be > 0, got {value}')


def validate_cfl(value):
    if value is not None and not 0 < value <= 1:
        raise ValidationError(f'cfl must lie in (0, 1], got {value}')


def validate_blowup_factor(value):
    if value is not None and not value > 1:
        raise ValidationError(f'blowup_factor must be > 1, got {value}')


def _reject_unknown(form_class, raw: Dict[str, Any], nested=()):
    unknown = sorted(set(raw) - set(form_class.base_fields) - set(nested))
    if unknown:
        raise ValidationError({key: 'unknown field' for key in unknown})


def _form_errors(form) -> ValidationError:
    return ValidationError({
        name: [str(message) for message in messages] for name, messages in form.errors.items()
    })


class InitialDataForm(forms.Form):
    family = forms.ChoiceField(choices=[(name, name) for name in FAMILIES], required=False)
    mass = forms.FloatField(required=False, validators=[validate_positive])
    amplitude = forms.FloatField(required=False)
    k = forms.IntegerField(required=False, min_value=2)

    def to_spec(self) -> InitialDataSpec:
        # an unset family comes back as ''
        return initial_data_from_dict({
            key: None if value == '' else value for key, value in self.cleaned_data.items()
        })


class RunParametersForm(forms.Form):
    """Fields shared by a single run and a sweep."""
    n = forms.IntegerField(min_value=1)
    R = forms.FloatField(validators=[validate_positive])
    N = forms.IntegerField(min_value=2)
    t_end = forms.FloatField(required=False, validators=[validate_positive])
    cfl = forms.FloatField(required=False, validators=[validate_cfl])
    blowup_factor = forms.FloatField(required=False, validators=[validate_blowup_factor])
    dt_min = forms.FloatField(required=False, validators=[validate_positive])
    sample_stride = forms.IntegerField(required=False, min_value=1)
    max_retries = forms.IntegerField(required=False, min_value=0)

    def run_parameters(self) -> Dict[str, Any]:
        defaults = settings.RADIAL_KS
        data = self.cleaned_data

        def pick(name, key):
            return data[name] if data.get(name) is not None else defaults[key]

        return {
            'n': data['n'],
            'R': data['R'],
            'N': data['N'],
            't_end': pick('t_end', 'T_END'),
            'cfl': pick('cfl', 'CFL'),
            'blowup_factor': pick('blowup_factor', 'BLOWUP_FACTOR'),
            'dt_min': pick('dt_min', 'DT_MIN'),
            'sample_stride': pick('sample_stride', 'SAMPLE_STRIDE'),
            'max_retries': pick('max_retries', 'MAX_RETRIES'),
        }


class SimConfigForm(RunParametersForm):
    chi = forms.FloatField(validators=[validate_positive])


class SweepSpecForm(RunParametersForm):
    chis = forms.JSONField()
    masses = forms.JSONField(required=False)
    mc_fractions = forms.JSONField(required=False)

    def _number_list(self, name: str, required: bool):
        value = self.cleaned_data.get(name)
        if value in (None, []):
            if required:
                raise ValidationError('this list must not be empty')
            return ()
        if not isinstance(value, list) or not all(
                isinstance(item, (int, float)) and not isinstance(item, bool) for item in value):
            raise ValidationError('expected a list of numbers')
        return tuple(float(item) for item in value)

    def clean_chis(self):
        return self._number_list('chis', required=True)

    def clean_masses(self):
        return self._number_list('masses', required=False)

    def clean_mc_fractions(self):
        return self._number_list('mc_fractions', required=False)


def _initial_data(raw: Dict[str, Any]) -> InitialDataSpec:
    u0_raw = raw.get('u0', {})
    if not isinstance(u0_raw, dict):
        raise ValidationError({'u0': 'expected an object'})
    _reject_unknown(InitialDataForm, u0_raw)
    form = InitialDataForm(data=u0_raw)
    if not form.is_valid():
        raise ValidationError({'u0': _form_errors(form).messages})
    return form.to_spec()


def load_sim_config(raw: Dict[str, Any]) -> SimConfig:
    """Validate a decoded run configuration."""
    if not isinstance(raw, dict):
        raise ValidationError('configuration must be a JSON object')
    _reject_unknown(SimConfigForm, raw, nested=('u0',))
    u0 = _initial_data(raw)
    form = SimConfigForm(data=raw)
    if not form.is_valid():
        raise _form_errors(form)
    return SimConfig(chi=form.cleaned_data['chi'], u0=u0, **form.run_parameters())


def load_sweep_spec(raw: Dict[str, Any]) -> SweepSpec:
    """Validate a decoded sweep configuration."""
    if not isinstance(raw, dict):
        raise ValidationError('sweep configuration must be a JSON object')
    _reject_unknown(SweepSpecForm, raw, nested=('u0',))
    u0 = _initial_data(raw)
    # JSONField expects encoded text when bound from a dict of Python values
    bound = {key: json.dumps(value) if key in ('chis', 'masses', 'mc_fractions') else value
             for key, value in raw.items()}
    form = SweepSpecForm(data=bound)
    if not form.is_valid():
        raise _form_errors(form)
    data = form.cleaned_data
    return SweepSpec(
        chis=data['chis'], masses=data['masses'], mc_fractions=data['mc_fractions'],
        u0=u0, **form.run_parameters(),
    )


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Decode a JSON file; unreadable or malformed files raise ValidationError naming the path."""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise ValidationError(f'File not found: {path}')
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f'Could not read {path}: {exc}')


def describe(exc: ValidationError) -> str:
    """One-line rendering of a ValidationError that keeps field names."""
    if hasattr(exc, 'error_dict'):
        return '; '.join(f"{name}: {' '.join(messages)}" for name, messages in exc.message_dict.items())
    return '; '.join(exc.messages)
