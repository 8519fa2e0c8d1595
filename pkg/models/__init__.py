"""Записи и перечисления, которыми обмениваются модули."""
